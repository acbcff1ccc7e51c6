#include "galb/solver.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <unordered_map>

#include "galb/action_space.hpp"
#include "galb/feasibility.hpp"

namespace galb {

SearchBudgetError::SearchBudgetError(std::uint64_t budget)
    : std::runtime_error("search node budget of " + std::to_string(budget) + " exhausted before proving optimality") {}

std::string state_key(const FactoryState& s) {
  std::string key;
  key.reserve(s.remaining.size() * sizeof(int) + s.finished.size() + s.inventories.size() * sizeof(int));
  auto put = [&key](const void* p, std::size_t n) { key.append(static_cast<const char*>(p), n); };
  put(s.remaining.data().data(), s.remaining.size() * sizeof(int));
  put(s.finished.data(), s.finished.size());
  put(s.inventories.data(), s.inventories.size() * sizeof(int));
  return key;
}

int lower_bound(const FactoryState& s, const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks;
  std::vector<int> chain(J, -1);
  auto eval = [&](auto&& self, int j) -> int {
    if (chain[j] >= 0) return chain[j];
    int value = 0;
    if (s.finished[j]) {
      value = 0;
    } else if (s.task_running(j)) {
      for (int i = 0; i < I; ++i)
        if (s.executing(i, j)) value = s.remaining(i, j);
    } else {
      int fastest = c.durations(0, j);
      for (int i = 1; i < I; ++i) fastest = std::min(fastest, c.durations(i, j));
      int before = 0;
      for (int p = 0; p < J; ++p)
        if (c.must_precede(p, j) && !s.finished[p]) before = std::max(before, self(self, p));
      value = fastest + before;
    }
    return chain[j] = value;
  };
  int bound = 0;
  for (int j = 0; j < J; ++j) bound = std::max(bound, eval(eval, j));
  return bound;
}

std::vector<TaskAssignment> feasible_assignments(const FactoryState& s, const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  std::vector<int> eligible;
  for (int j = 0; j < J; ++j) {
    bool ok = !s.finished[j] && !s.task_running(j);
    for (int p = 0; p < J && ok; ++p) ok = !(c.must_precede(p, j) && !s.finished[p]);
    if (ok) eligible.push_back(j);
  }

  std::vector<std::vector<AssignmentRow>> found;
  std::vector<AssignmentRow> rows(I, 0);
  std::vector<int> slots(I), buffers(static_cast<std::size_t>(I) * R), stock(s.inventories);
  for (int i = 0; i < I; ++i) {
    slots[i] = c.occupancy_caps[i] - s.occupancies[i];
    for (int r = 0; r < R; ++r) buffers[i * R + r] = s.buffers(i, r);
  }
  auto fits = [&](int i, int j) {
    if (slots[i] <= 0 || s.clock + c.durations(i, j) > c.deadlines[j]) return false;
    for (int r = 0; r < R; ++r) {
      const int need = c.resource_needs(j, r);
      if (buffers[i * R + r] + need > c.buffer_caps(i, r) || need > stock[r]) return false;
    }
    return true;
  };
  auto book = [&](int i, int j, int sign) {
    slots[i] -= sign;
    rows[i] ^= AssignmentRow{1} << j;
    for (int r = 0; r < R; ++r) {
      buffers[i * R + r] += sign * c.resource_needs(j, r);
      stock[r] -= sign * c.resource_needs(j, r);
    }
  };
  auto rec = [&](auto&& self, std::size_t k) -> void {
    if (k == eligible.size()) {
      found.push_back(rows);
      return;
    }
    const int j = eligible[k];
    self(self, k + 1);
    for (int i = 0; i < I; ++i) {
      if (!fits(i, j)) continue;
      book(i, j, +1);
      self(self, k + 1);
      book(i, j, -1);
    }
  };
  rec(rec, 0);

  auto weight = [](const std::vector<AssignmentRow>& r) {
    int n = 0;
    for (AssignmentRow v : r) n += std::popcount(v);
    return n;
  };
  std::sort(found.begin(), found.end(), [&](const auto& a, const auto& b) {
    const int wa = weight(a), wb = weight(b);
    if (wa != wb) return wa > wb;
    for (int i = 0; i < I; ++i) {
      const auto ka = row_lex_key(a[i], J), kb = row_lex_key(b[i], J);
      if (ka != kb) return ka < kb;
    }
    return false;
  });

  std::vector<TaskAssignment> out;
  out.reserve(found.size());
  for (const auto& r : found) out.push_back(concat_rows(r, J));
  return out;
}

namespace {

class BranchAndBound {
 public:
  BranchAndBound(const FactoryConfig& config, const SolveOptions& options) : config_(config), options_(options) {}

  SolveResult run(const FactoryState& start) {
    best_ = config_.horizon + 1;
    if (start.done) {
      SolveResult r;
      r.feasible = true;
      r.k_opt = start.clock;
      return r;
    }
    FactoryState state = start;
    search(state);
    SolveResult r;
    r.nodes_expanded = nodes_;
    r.feasible = best_ <= config_.horizon;
    if (r.feasible) {
      r.k_opt = best_;
      r.schedule = best_path_;
    }
    return r;
  }

 private:
  void search(const FactoryState& state) {
    if (++nodes_ > options_.node_budget) throw SearchBudgetError(options_.node_budget);
    if (state.done) {
      if (state.clock < best_) {
        best_ = state.clock;
        best_path_ = path_;
      }
      return;
    }
    if (state.clock >= config_.horizon) return;
    const int bound = state.clock + lower_bound(state, config_);
    if (bound >= best_) return;

    // Same state reached no later before: its subtree was already explored
    // against an incumbent at least as loose as the current one.
    auto [it, inserted] = earliest_.try_emplace(state_key(state), state.clock);
    if (!inserted) {
      if (it->second <= state.clock) return;
      it->second = state.clock;
    }

    for (const TaskAssignment& action : feasible_assignments(state, config_)) {
      FactoryState child = state;
      apply_assignment(child, action, config_);
      advance_execution(child, action, config_);
      path_.push_back({state.clock, action});
      search(child);
      path_.pop_back();
      if (bound >= best_) return;
    }
  }

  const FactoryConfig& config_;
  SolveOptions options_;
  int best_ = 0;
  std::uint64_t nodes_ = 0;
  std::vector<ScheduledAction> path_;
  std::vector<ScheduledAction> best_path_;
  std::unordered_map<std::string, int> earliest_;
};

}  // namespace

SolveResult solve_from(const FactoryState& start, const FactoryConfig& config, const SolveOptions& options) {
  config.validate();
  return BranchAndBound(config, options).run(start);
}

SolveResult solve(const FactoryConfig& config, const SolveOptions& options) {
  return solve_from(reset(config), config, options);
}

int replay_schedule(const FactoryState& start, const std::vector<ScheduledAction>& schedule,
                    const FactoryConfig& config) {
  FactoryState s = start;
  const RewardConfig reward;
  std::size_t next = 0;
  try {
    while (!episode_over(s, config)) {
      TaskAssignment action = null_assignment(config);
      if (next < schedule.size() && schedule[next].clock == s.clock) action = schedule[next++].action;
      if (next < schedule.size() && schedule[next].clock < s.clock) return -1;
      step_in_place(s, action, config, reward);
    }
  } catch (const FeasibilityError&) {
    return -1;
  }
  if (next != schedule.size() || !s.done) return -1;
  return s.clock;
}

}  // namespace galb
