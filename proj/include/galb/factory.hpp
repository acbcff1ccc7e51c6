#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "galb/grid.hpp"

namespace galb {

/// Raised when a problem instance violates a structural invariant. Each entry
/// of issues() is one line-item finding.
class InstanceError : public std::runtime_error {
 public:
  explicit InstanceError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Terminal reward shape: beta * h / (1 + k^alpha).
struct RewardConfig {
  double alpha = 1.0;
  double beta = 10.0;
};

/// Immutable problem instance. Indices are zero-based throughout the code;
/// the JSON loader and CLI output use the same zero-based convention.
struct FactoryConfig {
  int num_workstations = 0;
  int num_tasks = 0;
  int num_resources = 0;
  int horizon = 0;
  std::vector<int> occupancy_caps;  // |I|
  Grid<int> buffer_caps;            // |I| x |R|
  Grid<int> durations;              // |I| x |J|
  std::vector<int> deadlines;       // |J|
  // precedence(j1, j2) == -1 means j2 must finish before j1 may start.
  Grid<int> precedence;      // |J| x |J|
  Grid<int> resource_needs;  // |J| x |R|
  std::vector<int> inventories;  // |R|
  bool returnable_resources = false;

  /// Throws InstanceError listing every violated invariant.
  void validate() const;

  /// |I| * (1 + |J| * (1 + |R|))
  std::size_t state_dim() const;

  bool must_precede(int before, int after) const { return precedence(after, before) == -1; }
};

/// Task assignment a[k]: |I| x |J| binary matrix. The resource action y[k] is
/// implied (y(i, j, r) = a(i, j) for every r).
using TaskAssignment = Grid<std::uint8_t>;

TaskAssignment null_assignment(const FactoryConfig& config);
bool is_null(const TaskAssignment& action);

struct FactoryState {
  int clock = 0;
  std::vector<int> occupancies;        // |I|
  Grid<int> remaining;                 // |I| x |J|
  std::vector<int> allocated;          // |I| x |J| x |R|, row-major
  Grid<std::uint8_t> executing;        // |I| x |J|
  std::vector<std::uint8_t> finished;  // |J|
  std::vector<int> inventories;        // |R|
  Grid<int> buffers;                   // |I| x |R|
  bool done = false;                   // all tasks finished

  int& alloc(const FactoryConfig& c, int i, int j, int r) {
    return allocated[(static_cast<std::size_t>(i) * c.num_tasks + j) * c.num_resources + r];
  }
  int alloc(const FactoryConfig& c, int i, int j, int r) const {
    return allocated[(static_cast<std::size_t>(i) * c.num_tasks + j) * c.num_resources + r];
  }

  bool task_running(int j) const;
  int finished_count() const;

  bool operator==(const FactoryState&) const = default;
};

FactoryState reset(const FactoryConfig& config);

/// Concatenation [o; d; r] scaled by max(O), max(D) and max(C).
std::vector<double> flatten_state(const FactoryState& state, const FactoryConfig& config);
void flatten_state(const FactoryState& state, const FactoryConfig& config, std::span<double> out);

struct StepResult {
  FactoryState state;
  double reward = 0.0;
  bool done = false;
};

/// Checked transition. Throws FeasibilityError (see feasibility.hpp) when the
/// action is infeasible and std::logic_error when the episode is already over.
StepResult transition(const FactoryState& state, const TaskAssignment& action,
                      const FactoryConfig& config, const RewardConfig& reward_cfg);

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
};

/// In-place checked transition.
StepOutcome step_in_place(FactoryState& state, const TaskAssignment& action,
                          const FactoryConfig& config, const RewardConfig& reward_cfg);

/// Booking phase only: occupancies, remaining durations, execution flags,
/// allocations, buffers and inventories. Performs no validation.
void apply_assignment(FactoryState& state, const TaskAssignment& action, const FactoryConfig& config);

/// Execution phase: decrements every executing task not in `assigned`,
/// completes tasks reaching zero, advances the clock and updates `done`.
void advance_execution(FactoryState& state, const TaskAssignment& assigned, const FactoryConfig& config);

bool episode_over(const FactoryState& state, const FactoryConfig& config);

double terminal_reward(int clock, const RewardConfig& reward_cfg);

/// Returns one message per violated state invariant (empty when consistent).
std::vector<std::string> check_state_invariants(const FactoryState& state, const FactoryConfig& config);

}  // namespace galb
