#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "galb/factory.hpp"

namespace galb {

/// The search hit its node budget before proving optimality.
class SearchBudgetError : public std::runtime_error {
 public:
  explicit SearchBudgetError(std::uint64_t budget);
};

struct ScheduledAction {
  int clock = 0;
  TaskAssignment action;
};

struct SolveResult {
  bool feasible = false;  // some schedule finishes every task within the horizon
  int k_opt = 0;          // minimum ending time (absolute clock); valid when feasible
  std::vector<ScheduledAction> schedule;
  std::uint64_t nodes_expanded = 0;
};

struct SolveOptions {
  std::uint64_t node_budget = 100'000'000;
};

/// Depth-first branch-and-bound over feasible joint assignments from reset.
SolveResult solve(const FactoryConfig& config, const SolveOptions& options = {});

/// Same search seeded at an arbitrary reachable state, bounded by the
/// remaining horizon.
SolveResult solve_from(const FactoryState& start, const FactoryConfig& config, const SolveOptions& options = {});

/// Admissible bound on the number of steps still needed to finish every task.
int lower_bound(const FactoryState& state, const FactoryConfig& config);

/// Every feasible joint assignment from `state`, generated directly from the
/// constraints, ordered by decreasing assignment count then lexicographically.
std::vector<TaskAssignment> feasible_assignments(const FactoryState& state, const FactoryConfig& config);

/// Canonical byte key of the clock-independent part of a state.
std::string state_key(const FactoryState& state);

/// Replays a schedule from `start`; returns the ending clock or -1 if the
/// schedule is infeasible or leaves tasks unfinished.
int replay_schedule(const FactoryState& start, const std::vector<ScheduledAction>& schedule,
                    const FactoryConfig& config);

}  // namespace galb
