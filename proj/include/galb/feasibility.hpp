#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "galb/factory.hpp"

namespace galb {

class CentralizedActionSpace;
class AgentActionSpace;

/// Numbered assignment constraints. 1-7 are the seven masking constraints;
/// 0 is the structural rule that a task goes to at most one workstation.
enum class Violation : int {
  none = -1,
  unique_assignment = 0,
  finished_task = 1,
  task_executing = 2,
  deadline = 3,
  occupancy = 4,
  precedence = 5,
  buffer_capacity = 6,
  inventory = 7,
};

const char* describe(Violation v);

class FeasibilityError : public std::runtime_error {
 public:
  explicit FeasibilityError(Violation v);
  Violation violation() const { return violation_; }

 private:
  Violation violation_;
};

/// First violated constraint (Violation::none when feasible). Throws
/// std::invalid_argument on a shape mismatch.
Violation first_violation(const FactoryState& state, const TaskAssignment& action,
                          const FactoryConfig& config);

inline bool action_feasible(const FactoryState& state, const TaskAssignment& action,
                            const FactoryConfig& config) {
  return first_violation(state, action, config) == Violation::none;
}

/// Binary feasibility vector over an enumerated action space.
using ActionMask = std::vector<std::uint8_t>;

ActionMask centralized_mask(const FactoryState& state, const CentralizedActionSpace& space,
                            const FactoryConfig& config);

/// Mask for workstation `agent`: each candidate row is checked as a joint
/// action whose other rows are zero.
ActionMask agent_mask(const FactoryState& state, int agent, const AgentActionSpace& space,
                      const FactoryConfig& config);

/// Row-level check used by agent_mask.
Violation first_row_violation(const FactoryState& state, int agent, std::uint64_t row,
                              const FactoryConfig& config);

/// Inspects the state produced by forcing an assignment through
/// apply_assignment without validation, and reports every constraint whose
/// effect is visible in `booked` relative to `before`.
std::vector<Violation> audit_booking(const FactoryState& before, const FactoryState& booked,
                                     const FactoryConfig& config);

std::size_t count_feasible(const ActionMask& mask);

}  // namespace galb
