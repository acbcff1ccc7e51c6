#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "galb/factory.hpp"

namespace galb {

using BigCount = boost::multiprecision::cpp_int;

/// Dimensions that determine the size of the assignment action spaces.
struct SpaceDims {
  int workstations = 0;
  int tasks = 0;
  std::vector<int> occupancy;  // one cap per workstation

  static SpaceDims of(const FactoryConfig& config);
};

BigCount binomial(int n, int k);

/// 2^(|I| |J|): every binary assignment matrix.
BigCount count_unconstrained(const SpaceDims& dims);
/// (|I| + 1)^|J|: matrices whose columns sum to at most one.
BigCount count_unique_assignment(const SpaceDims& dims);
/// Nested binomial sum: unique assignment plus per-row occupancy caps.
BigCount count_occupancy_constrained(const SpaceDims& dims);
/// sum_{t=0}^{O_i} C(|J|, t)
BigCount count_agent_space(const SpaceDims& dims, int workstation);

inline BigCount count_unconstrained(const FactoryConfig& c) { return count_unconstrained(SpaceDims::of(c)); }
inline BigCount count_unique_assignment(const FactoryConfig& c) { return count_unique_assignment(SpaceDims::of(c)); }
inline BigCount count_occupancy_constrained(const FactoryConfig& c) {
  return count_occupancy_constrained(SpaceDims::of(c));
}
inline BigCount count_agent_space(const FactoryConfig& c, int i) { return count_agent_space(SpaceDims::of(c), i); }

class SpaceTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultMaterializationCap = 10'000'000;

/// Row of an assignment matrix as a bitmask: bit j set means task j.
using AssignmentRow = std::uint64_t;

/// Lexicographic key of a row read as a binary string (task 0 first).
std::uint64_t row_lex_key(AssignmentRow row, int num_tasks);

/// Per-workstation action set A_i: rows with at most O_i tasks, sorted
/// lexicographically so index 0 is the null row.
class AgentActionSpace {
 public:
  AgentActionSpace(const FactoryConfig& config, int workstation,
                   std::uint64_t cap = kDefaultMaterializationCap);

  int workstation() const { return workstation_; }
  int num_tasks() const { return num_tasks_; }
  std::size_t size() const { return rows_.size(); }
  AssignmentRow row(std::size_t index) const { return rows_[index]; }
  std::span<const AssignmentRow> rows() const { return rows_; }
  /// Index of `row`, or nullopt if it is not in the set.
  std::optional<std::size_t> encode(AssignmentRow row) const;

 private:
  int workstation_;
  int num_tasks_;
  std::vector<AssignmentRow> rows_;
  std::unordered_map<AssignmentRow, std::size_t> index_;
};

/// Centralized action set A: matrices with column sums <= 1 and row sums
/// <= O_i, sorted lexicographically on the row-major flattening.
class CentralizedActionSpace {
 public:
  explicit CentralizedActionSpace(const FactoryConfig& config,
                                  std::uint64_t cap = kDefaultMaterializationCap);

  std::size_t size() const { return count_; }
  int num_workstations() const { return num_workstations_; }
  int num_tasks() const { return num_tasks_; }

  /// Row bitmasks of action z.
  std::span<const AssignmentRow> rows(std::size_t z) const {
    return {rows_.data() + z * num_workstations_, static_cast<std::size_t>(num_workstations_)};
  }
  TaskAssignment decode(std::size_t z) const;
  std::optional<std::size_t> encode(const TaskAssignment& action) const;
  /// Number of tasks assigned by action z.
  int assigned_count(std::size_t z) const;

 private:
  int num_workstations_;
  int num_tasks_;
  std::size_t count_ = 0;
  std::vector<AssignmentRow> rows_;  // count_ x |I|
  struct KeyHash {
    std::size_t operator()(const std::vector<AssignmentRow>& key) const;
  };
  std::unordered_map<std::vector<AssignmentRow>, std::size_t, KeyHash> index_;
};

/// Stacks one row per workstation. Only the shape is checked.
TaskAssignment concat_rows(std::span<const AssignmentRow> rows, int num_tasks);
AssignmentRow row_of(const TaskAssignment& action, int workstation);

}  // namespace galb
