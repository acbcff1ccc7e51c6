#include "galb/factory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "galb/feasibility.hpp"

namespace galb {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream out;
  out << "invalid factory instance:";
  for (const auto& issue : issues) out << "\n  - " << issue;
  return out.str();
}

bool precedence_has_cycle(const FactoryConfig& c) {
  // Kahn's algorithm on edges before -> after.
  const int n = c.num_tasks;
  std::vector<int> indegree(n, 0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (c.precedence(a, b) == 1) ++indegree[b];
  std::vector<int> queue;
  for (int j = 0; j < n; ++j)
    if (indegree[j] == 0) queue.push_back(j);
  int seen = 0;
  while (!queue.empty()) {
    int a = queue.back();
    queue.pop_back();
    ++seen;
    for (int b = 0; b < n; ++b)
      if (c.precedence(a, b) == 1 && --indegree[b] == 0) queue.push_back(b);
  }
  return seen != n;
}

}  // namespace

InstanceError::InstanceError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

void FactoryConfig::validate() const {
  std::vector<std::string> issues;
  auto shape = [&](const char* name, std::size_t got_r, std::size_t got_c, int want_r, int want_c) {
    if (got_r != static_cast<std::size_t>(want_r) || got_c != static_cast<std::size_t>(want_c)) {
      std::ostringstream m;
      m << name << " has shape " << got_r << "x" << got_c << ", expected " << want_r << "x" << want_c;
      issues.push_back(m.str());
      return false;
    }
    return true;
  };

  if (num_workstations <= 0) issues.push_back("num_workstations must be positive");
  if (num_tasks <= 0) issues.push_back("num_tasks must be positive");
  if (num_resources <= 0) issues.push_back("num_resources must be positive");
  if (horizon <= 0) issues.push_back("horizon must be positive");
  if (!issues.empty()) throw InstanceError(std::move(issues));

  const int I = num_workstations, J = num_tasks, R = num_resources;
  bool ok_o = shape("occupancy_caps", occupancy_caps.size(), 1, I, 1);
  bool ok_u = shape("buffer_caps", buffer_caps.rows(), buffer_caps.cols(), I, R);
  bool ok_d = shape("durations", durations.rows(), durations.cols(), I, J);
  bool ok_f = shape("deadlines", deadlines.size(), 1, J, 1);
  bool ok_p = shape("precedence", precedence.rows(), precedence.cols(), J, J);
  bool ok_c = shape("resource_needs", resource_needs.rows(), resource_needs.cols(), J, R);
  bool ok_g = shape("inventories", inventories.size(), 1, R, 1);

  if (ok_o)
    for (int i = 0; i < I; ++i)
      if (occupancy_caps[i] <= 0)
        issues.push_back("occupancy_caps[" + std::to_string(i) + "] must be positive");
  if (ok_u)
    for (int i = 0; i < I; ++i)
      for (int r = 0; r < R; ++r)
        if (buffer_caps(i, r) < 0)
          issues.push_back("buffer_caps[" + std::to_string(i) + "][" + std::to_string(r) + "] is negative");
  if (ok_d)
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        if (durations(i, j) <= 0)
          issues.push_back("durations[" + std::to_string(i) + "][" + std::to_string(j) + "] must be positive");
  if (ok_f)
    for (int j = 0; j < J; ++j)
      if (deadlines[j] <= 0) issues.push_back("deadlines[" + std::to_string(j) + "] must be positive");
  if (ok_c)
    for (int j = 0; j < J; ++j)
      for (int r = 0; r < R; ++r)
        if (resource_needs(j, r) < 0)
          issues.push_back("resource_needs[" + std::to_string(j) + "][" + std::to_string(r) + "] is negative");
  if (ok_g)
    for (int r = 0; r < R; ++r)
      if (inventories[r] < 0) issues.push_back("inventories[" + std::to_string(r) + "] is negative");
  if (ok_p) {
    bool entries_ok = true;
    for (int a = 0; a < J; ++a) {
      if (precedence(a, a) != 0) {
        issues.push_back("precedence[" + std::to_string(a) + "][" + std::to_string(a) + "] must be zero");
        entries_ok = false;
      }
      for (int b = 0; b < J; ++b) {
        int v = precedence(a, b);
        if (v < -1 || v > 1) {
          issues.push_back("precedence[" + std::to_string(a) + "][" + std::to_string(b) + "] not in {-1,0,1}");
          entries_ok = false;
        } else if (a < b && v != -precedence(b, a)) {
          issues.push_back("precedence[" + std::to_string(a) + "][" + std::to_string(b) +
                           "] and its transpose are not antisymmetric");
          entries_ok = false;
        }
      }
    }
    if (entries_ok && precedence_has_cycle(*this)) issues.push_back("precedence graph contains a cycle");
  }
  if (!issues.empty()) throw InstanceError(std::move(issues));
}

std::size_t FactoryConfig::state_dim() const {
  return static_cast<std::size_t>(num_workstations) *
         (1 + static_cast<std::size_t>(num_tasks) * (1 + static_cast<std::size_t>(num_resources)));
}

TaskAssignment null_assignment(const FactoryConfig& config) {
  return TaskAssignment(config.num_workstations, config.num_tasks, 0);
}

bool is_null(const TaskAssignment& action) {
  return std::all_of(action.data().begin(), action.data().end(), [](auto v) { return v == 0; });
}

bool FactoryState::task_running(int j) const {
  for (std::size_t i = 0; i < executing.rows(); ++i)
    if (executing(i, j)) return true;
  return false;
}

int FactoryState::finished_count() const {
  return static_cast<int>(std::count(finished.begin(), finished.end(), 1));
}

FactoryState reset(const FactoryConfig& config) {
  config.validate();
  const int I = config.num_workstations, J = config.num_tasks, R = config.num_resources;
  FactoryState s;
  s.clock = 0;
  s.occupancies.assign(I, 0);
  s.remaining = Grid<int>(I, J, 0);
  s.allocated.assign(static_cast<std::size_t>(I) * J * R, 0);
  s.executing = Grid<std::uint8_t>(I, J, 0);
  s.finished.assign(J, 0);
  s.inventories = config.inventories;
  s.buffers = Grid<int>(I, R, 0);
  s.done = false;
  return s;
}

void flatten_state(const FactoryState& state, const FactoryConfig& config, std::span<double> out) {
  if (out.size() != config.state_dim()) throw std::invalid_argument("flatten_state: output size mismatch");
  const double o_scale = *std::max_element(config.occupancy_caps.begin(), config.occupancy_caps.end());
  const double d_scale = *std::max_element(config.durations.data().begin(), config.durations.data().end());
  int c_max = 0;
  for (int v : config.resource_needs.data()) c_max = std::max(c_max, v);
  const double r_scale = c_max > 0 ? c_max : 1.0;

  std::size_t k = 0;
  for (int v : state.occupancies) out[k++] = v / o_scale;
  for (int v : state.remaining.data()) out[k++] = v / d_scale;
  for (int v : state.allocated) out[k++] = v / r_scale;
}

std::vector<double> flatten_state(const FactoryState& state, const FactoryConfig& config) {
  std::vector<double> out(config.state_dim());
  flatten_state(state, config, out);
  return out;
}

void apply_assignment(FactoryState& s, const TaskAssignment& a, const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      if (!a(i, j)) continue;
      s.occupancies[i] += 1;
      s.remaining(i, j) = c.durations(i, j);
      s.executing(i, j) = 1;
      for (int r = 0; r < R; ++r) {
        const int need = c.resource_needs(j, r);
        s.alloc(c, i, j, r) += need;
        s.buffers(i, r) += need;
        s.inventories[r] -= need;
      }
    }
  }
}

void advance_execution(FactoryState& s, const TaskAssignment& assigned, const FactoryConfig& c) {
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      if (!s.executing(i, j) || assigned(i, j)) continue;
      if (--s.remaining(i, j) > 0) continue;
      s.executing(i, j) = 0;
      s.finished[j] = 1;
      s.occupancies[i] -= 1;
      for (int r = 0; r < R; ++r) {
        const int held = s.alloc(c, i, j, r);
        s.alloc(c, i, j, r) = 0;
        s.buffers(i, r) -= held;
        if (c.returnable_resources) s.inventories[r] += held;
      }
    }
  }
  s.clock += 1;
  s.done = s.finished_count() == J;
}

bool episode_over(const FactoryState& state, const FactoryConfig& config) {
  return state.done || state.clock >= config.horizon;
}

double terminal_reward(int clock, const RewardConfig& reward_cfg) {
  return reward_cfg.beta / (1.0 + std::pow(static_cast<double>(clock), reward_cfg.alpha));
}

StepOutcome step_in_place(FactoryState& state, const TaskAssignment& action, const FactoryConfig& config,
                          const RewardConfig& reward_cfg) {
  if (episode_over(state, config)) throw std::logic_error("transition called on a terminated episode");
  const Violation v = first_violation(state, action, config);
  if (v != Violation::none) throw FeasibilityError(v);
  apply_assignment(state, action, config);
  advance_execution(state, action, config);
  StepOutcome out;
  out.done = episode_over(state, config);
  out.reward = state.done ? terminal_reward(state.clock, reward_cfg) : 0.0;
  return out;
}

StepResult transition(const FactoryState& state, const TaskAssignment& action, const FactoryConfig& config,
                      const RewardConfig& reward_cfg) {
  StepResult result{state, 0.0, false};
  const StepOutcome o = step_in_place(result.state, action, config, reward_cfg);
  result.reward = o.reward;
  result.done = o.done;
  return result;
}

std::vector<std::string> check_state_invariants(const FactoryState& s, const FactoryConfig& c) {
  std::vector<std::string> bad;
  const int I = c.num_workstations, J = c.num_tasks, R = c.num_resources;
  auto at = [](const char* what, int a, int b = -1) {
    std::string m = what;
    m += " at (" + std::to_string(a);
    if (b >= 0) m += "," + std::to_string(b);
    return m + ")";
  };
  for (int i = 0; i < I; ++i) {
    int running = 0;
    for (int j = 0; j < J; ++j) running += s.executing(i, j);
    if (running != s.occupancies[i]) bad.push_back(at("occupancy differs from executing count", i));
    if (s.occupancies[i] > c.occupancy_caps[i]) bad.push_back(at("occupancy above cap", i));
    for (int r = 0; r < R; ++r) {
      int held = 0;
      for (int j = 0; j < J; ++j) held += s.alloc(c, i, j, r);
      if (held != s.buffers(i, r)) bad.push_back(at("buffer differs from allocation sum", i, r));
      if (s.buffers(i, r) > c.buffer_caps(i, r)) bad.push_back(at("buffer above cap", i, r));
    }
    for (int j = 0; j < J; ++j) {
      if (s.executing(i, j) && s.remaining(i, j) < 1) bad.push_back(at("executing task without remaining time", i, j));
      if (!s.executing(i, j) && s.remaining(i, j) != 0)
        bad.push_back(at("idle task with stale remaining time", i, j));
    }
  }
  for (int j = 0; j < J; ++j) {
    int places = 0;
    for (int i = 0; i < I; ++i) places += s.executing(i, j);
    if (places > 1) bad.push_back(at("task executing on several workstations", j));
    if (s.finished[j] && places != 0) bad.push_back(at("finished task still executing", j));
    if (places == 1)
      for (int p = 0; p < J; ++p)
        if (c.must_precede(p, j) && !s.finished[p]) bad.push_back(at("task running before its predecessor", j, p));
  }
  if (s.done != (s.finished_count() == J)) bad.push_back("done flag inconsistent with finished tasks");
  for (int r = 0; r < R; ++r) {
    if (s.inventories[r] < 0) bad.push_back(at("negative inventory", r));
    long total = s.inventories[r];
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) total += s.alloc(c, i, j, r);
    if (!c.returnable_resources)
      for (int j = 0; j < J; ++j)
        if (s.finished[j]) total += c.resource_needs(j, r);
    if (total != c.inventories[r]) bad.push_back(at("resource conservation broken", r));
  }
  return bad;
}

}  // namespace galb
