#include "galb/feasibility.hpp"

#include <algorithm>
#include <bit>

#include "galb/action_space.hpp"

namespace galb {

const char* describe(Violation v) {
  switch (v) {
    case Violation::none: return "feasible";
    case Violation::unique_assignment: return "task assigned to more than one workstation";
    case Violation::finished_task: return "constraint 1: task already finished";
    case Violation::task_executing: return "constraint 2: task already executing";
    case Violation::deadline: return "constraint 3: deadline would be violated";
    case Violation::occupancy: return "constraint 4: workstation occupancy cap exceeded";
    case Violation::precedence: return "constraint 5: predecessor not finished";
    case Violation::buffer_capacity: return "constraint 6: workstation buffer capacity exceeded";
    case Violation::inventory: return "constraint 7: factory inventory insufficient";
  }
  return "unknown";
}

FeasibilityError::FeasibilityError(Violation v)
    : std::runtime_error(std::string("infeasible action: ") + describe(v)), violation_(v) {}

namespace {

// State-derived quantities shared by every candidate action.
struct MaskContext {
  AssignmentRow blocked = 0;                 // constraints 1, 2, 5
  std::vector<AssignmentRow> late;           // constraint 3, per workstation
  std::vector<int> free_slots;               // constraint 4
};

MaskContext make_context(const FactoryState& s, const FactoryConfig& c) {
  MaskContext ctx;
  const int I = c.num_workstations, J = c.num_tasks;
  for (int j = 0; j < J; ++j) {
    bool bad = s.finished[j] || s.task_running(j);
    for (int p = 0; p < J && !bad; ++p) bad = c.must_precede(p, j) && !s.finished[p];
    if (bad) ctx.blocked |= AssignmentRow{1} << j;
  }
  ctx.late.assign(I, 0);
  ctx.free_slots.assign(I, 0);
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j)
      if (s.clock + c.durations(i, j) > c.deadlines[j]) ctx.late[i] |= AssignmentRow{1} << j;
    ctx.free_slots[i] = c.occupancy_caps[i] - s.occupancies[i];
  }
  return ctx;
}

bool row_fits_buffers(const FactoryState& s, const FactoryConfig& c, int i, AssignmentRow row) {
  for (int r = 0; r < c.num_resources; ++r) {
    long need = s.buffers(i, r);
    for (AssignmentRow bits = row; bits; bits &= bits - 1) need += c.resource_needs(std::countr_zero(bits), r);
    if (need > c.buffer_caps(i, r)) return false;
  }
  return true;
}

bool rows_fit_inventory(const FactoryState& s, const FactoryConfig& c, AssignmentRow all_tasks) {
  for (int r = 0; r < c.num_resources; ++r) {
    long need = 0;
    for (AssignmentRow bits = all_tasks; bits; bits &= bits - 1) need += c.resource_needs(std::countr_zero(bits), r);
    if (need > s.inventories[r]) return false;
  }
  return true;
}

bool rows_feasible(const FactoryState& s, const FactoryConfig& c, const MaskContext& ctx,
                   std::span<const AssignmentRow> rows, int first_row) {
  AssignmentRow used = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const AssignmentRow row = rows[k];
    if (!row) continue;
    const int i = first_row + static_cast<int>(k);
    if (row & used) return false;
    if (row & (ctx.blocked | ctx.late[i])) return false;
    if (std::popcount(row) > ctx.free_slots[i]) return false;
    if (!row_fits_buffers(s, c, i, row)) return false;
    used |= row;
  }
  return used == 0 || rows_fit_inventory(s, c, used);
}

}  // namespace

Violation first_violation(const FactoryState& s, const TaskAssignment& a, const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  if (a.rows() != static_cast<std::size_t>(I) || a.cols() != static_cast<std::size_t>(J))
    throw std::invalid_argument("action shape does not match the instance");

  for (int j = 0; j < J; ++j) {
    int col = 0;
    for (int i = 0; i < I; ++i) col += a(i, j) != 0;
    if (col > 1) return Violation::unique_assignment;
  }
  auto any_assigned = [&](auto&& pred) {
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        if (a(i, j) && pred(i, j)) return true;
    return false;
  };
  if (any_assigned([&](int, int j) { return s.finished[j] != 0; })) return Violation::finished_task;
  if (any_assigned([&](int, int j) { return s.task_running(j); })) return Violation::task_executing;
  if (any_assigned([&](int i, int j) { return s.clock + c.durations(i, j) > c.deadlines[j]; }))
    return Violation::deadline;
  for (int i = 0; i < I; ++i) {
    int load = s.occupancies[i];
    for (int j = 0; j < J; ++j) load += a(i, j) != 0;
    if (load > c.occupancy_caps[i]) return Violation::occupancy;
  }
  if (any_assigned([&](int, int j1) {
        for (int j2 = 0; j2 < J; ++j2)
          if (c.precedence(j1, j2) == -1 && !s.finished[j2]) return true;
        return false;
      }))
    return Violation::precedence;
  for (int i = 0; i < I; ++i)
    for (int r = 0; r < R; ++r) {
      long need = s.buffers(i, r);
      for (int j = 0; j < J; ++j)
        if (a(i, j)) need += c.resource_needs(j, r);
      if (need > c.buffer_caps(i, r)) return Violation::buffer_capacity;
    }
  for (int r = 0; r < R; ++r) {
    long need = 0;
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        if (a(i, j)) need += c.resource_needs(j, r);
    if (need > s.inventories[r]) return Violation::inventory;
  }
  return Violation::none;
}

ActionMask centralized_mask(const FactoryState& state, const CentralizedActionSpace& space,
                            const FactoryConfig& config) {
  const MaskContext ctx = make_context(state, config);
  const auto n = static_cast<std::ptrdiff_t>(space.size());
  ActionMask mask(space.size(), 0);
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t z = 0; z < n; ++z) mask[z] = rows_feasible(state, config, ctx, space.rows(z), 0) ? 1 : 0;
  return mask;
}

Violation first_row_violation(const FactoryState& state, int agent, AssignmentRow row, const FactoryConfig& config) {
  TaskAssignment a = null_assignment(config);
  for (int j = 0; j < config.num_tasks; ++j) a(agent, j) = (row >> j) & 1u;
  return first_violation(state, a, config);
}

ActionMask agent_mask(const FactoryState& state, int agent, const AgentActionSpace& space,
                      const FactoryConfig& config) {
  const MaskContext ctx = make_context(state, config);
  ActionMask mask(space.size(), 0);
  for (std::size_t k = 0; k < space.size(); ++k) {
    const AssignmentRow row = space.row(k);
    mask[k] = rows_feasible(state, config, ctx, std::span<const AssignmentRow>(&row, 1), agent) ? 1 : 0;
  }
  return mask;
}

std::vector<Violation> audit_booking(const FactoryState& before, const FactoryState& booked,
                                     const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  std::vector<Violation> found;
  auto flag = [&](Violation v) {
    if (std::find(found.begin(), found.end(), v) == found.end()) found.push_back(v);
  };
  for (int j = 0; j < J; ++j) {
    int places = 0;
    for (int i = 0; i < I; ++i) places += booked.executing(i, j);
    if (booked.finished[j] && places > 0) flag(Violation::finished_task);
    if (places > 1) flag(before.task_running(j) ? Violation::task_executing : Violation::unique_assignment);
  }
  for (int i = 0; i < I; ++i) {
    int running = 0;
    for (int j = 0; j < J; ++j) running += booked.executing(i, j);
    // A re-booked running task leaves the execution flag at one but counts twice.
    if (running != booked.occupancies[i]) flag(Violation::task_executing);
    if (booked.occupancies[i] > c.occupancy_caps[i]) flag(Violation::occupancy);
    for (int r = 0; r < R; ++r)
      if (booked.buffers(i, r) > c.buffer_caps(i, r)) flag(Violation::buffer_capacity);
    for (int j = 0; j < J; ++j) {
      const bool started = booked.executing(i, j) && !before.executing(i, j);
      if (!started) continue;
      if (booked.clock + booked.remaining(i, j) > c.deadlines[j]) flag(Violation::deadline);
      for (int p = 0; p < J; ++p)
        if (c.must_precede(p, j) && !booked.finished[p]) flag(Violation::precedence);
    }
  }
  for (int r = 0; r < R; ++r)
    if (booked.inventories[r] < 0) flag(Violation::inventory);
  return found;
}

std::size_t count_feasible(const ActionMask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

}  // namespace galb
