#include "galb/action_space.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace galb {

SpaceDims SpaceDims::of(const FactoryConfig& config) {
  return {config.num_workstations, config.num_tasks, config.occupancy_caps};
}

BigCount binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigCount result = 1;
  for (int t = 1; t <= k; ++t) {
    result *= n - k + t;
    result /= t;
  }
  return result;
}

BigCount count_unconstrained(const SpaceDims& dims) {
  BigCount one = 1;
  return one << (dims.workstations * dims.tasks);
}

BigCount count_unique_assignment(const SpaceDims& dims) {
  return boost::multiprecision::pow(BigCount(dims.workstations + 1), dims.tasks);
}

namespace {

// Workstations from `i` onward choose among `free_tasks` unassigned tasks.
BigCount nested_sum(const SpaceDims& dims, int i, int free_tasks) {
  if (i == dims.workstations) return 1;
  BigCount total = 0;
  const int upto = std::min(dims.occupancy[i], free_tasks);
  for (int t = 0; t <= upto; ++t) total += binomial(free_tasks, t) * nested_sum(dims, i + 1, free_tasks - t);
  return total;
}

}  // namespace

BigCount count_occupancy_constrained(const SpaceDims& dims) {
  if (static_cast<int>(dims.occupancy.size()) != dims.workstations)
    throw std::invalid_argument("occupancy vector length differs from workstation count");
  return nested_sum(dims, 0, dims.tasks);
}

BigCount count_agent_space(const SpaceDims& dims, int workstation) {
  if (workstation < 0 || workstation >= dims.workstations) throw std::out_of_range("workstation index");
  BigCount total = 0;
  const int upto = std::min(dims.occupancy[workstation], dims.tasks);
  for (int t = 0; t <= upto; ++t) total += binomial(dims.tasks, t);
  return total;
}

std::uint64_t row_lex_key(AssignmentRow row, int num_tasks) {
  std::uint64_t key = 0;
  for (int j = 0; j < num_tasks; ++j) key = (key << 1) | ((row >> j) & 1u);
  return key;
}

namespace {

void check_cap(const BigCount& count, std::uint64_t cap, const std::string& what) {
  if (count > cap)
    throw SpaceTooLargeError(what + " has " + count.str() + " actions, above the materialization cap of " +
                             std::to_string(cap) + "; use multi-agent mode");
}

std::vector<AssignmentRow> sorted_rows(int num_tasks, int max_ones) {
  std::vector<AssignmentRow> rows;
  const std::uint64_t limit = std::uint64_t{1} << num_tasks;
  // Enumerate by lexicographic key; map the key back to a task bitmask.
  for (std::uint64_t key = 0; key < limit; ++key) {
    if (std::popcount(key) > max_ones) continue;
    AssignmentRow row = 0;
    for (int j = 0; j < num_tasks; ++j)
      if ((key >> (num_tasks - 1 - j)) & 1u) row |= AssignmentRow{1} << j;
    rows.push_back(row);
  }
  return rows;
}

std::vector<AssignmentRow> sorted_rows_sparse(int num_tasks, int max_ones) {
  // Subsets of size <= max_ones without walking all 2^|J| keys.
  std::vector<AssignmentRow> rows{0};
  auto rec = [&](auto&& self, int start, AssignmentRow acc, int depth) -> void {
    if (depth == max_ones) return;
    for (int j = start; j < num_tasks; ++j) {
      AssignmentRow next = acc | (AssignmentRow{1} << j);
      rows.push_back(next);
      self(self, j + 1, next, depth + 1);
    }
  };
  rec(rec, 0, 0, 0);
  std::sort(rows.begin(), rows.end(), [num_tasks](AssignmentRow a, AssignmentRow b) {
    return row_lex_key(a, num_tasks) < row_lex_key(b, num_tasks);
  });
  return rows;
}

}  // namespace

AgentActionSpace::AgentActionSpace(const FactoryConfig& config, int workstation, std::uint64_t cap)
    : workstation_(workstation), num_tasks_(config.num_tasks) {
  if (workstation < 0 || workstation >= config.num_workstations) throw std::out_of_range("workstation index");
  if (num_tasks_ > 63) throw std::invalid_argument("at most 63 tasks are supported per row");
  check_cap(count_agent_space(config, workstation), cap, "agent action space");
  const int max_ones = std::min(config.occupancy_caps[workstation], num_tasks_);
  rows_ = num_tasks_ <= 20 ? sorted_rows(num_tasks_, max_ones) : sorted_rows_sparse(num_tasks_, max_ones);
  index_.reserve(rows_.size());
  for (std::size_t k = 0; k < rows_.size(); ++k) index_.emplace(rows_[k], k);
}

std::optional<std::size_t> AgentActionSpace::encode(AssignmentRow row) const {
  auto it = index_.find(row);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t CentralizedActionSpace::KeyHash::operator()(const std::vector<AssignmentRow>& key) const {
  std::size_t h = 1469598103934665603ull;
  for (AssignmentRow r : key) h = (h ^ std::hash<AssignmentRow>{}(r)) * 1099511628211ull;
  return h;
}

CentralizedActionSpace::CentralizedActionSpace(const FactoryConfig& config, std::uint64_t cap)
    : num_workstations_(config.num_workstations), num_tasks_(config.num_tasks) {
  if (num_tasks_ > 63) throw std::invalid_argument("at most 63 tasks are supported per row");
  check_cap(count_occupancy_constrained(config), cap, "centralized action space");

  std::vector<std::vector<AssignmentRow>> per_row;
  for (int i = 0; i < num_workstations_; ++i) {
    const int max_ones = std::min(config.occupancy_caps[i], num_tasks_);
    per_row.push_back(num_tasks_ <= 20 ? sorted_rows(num_tasks_, max_ones) : sorted_rows_sparse(num_tasks_, max_ones));
  }
  // Row-major lexicographic order equals the order of the row-key tuple, so a
  // depth-first walk over sorted rows emits actions already sorted.
  std::vector<AssignmentRow> current(num_workstations_, 0);
  auto rec = [&](auto&& self, int i, AssignmentRow used) -> void {
    if (i == num_workstations_) {
      rows_.insert(rows_.end(), current.begin(), current.end());
      ++count_;
      return;
    }
    for (AssignmentRow row : per_row[i]) {
      if (row & used) continue;
      current[i] = row;
      self(self, i + 1, used | row);
    }
  };
  rec(rec, 0, 0);

  index_.reserve(count_);
  for (std::size_t z = 0; z < count_; ++z) {
    auto r = rows(z);
    index_.emplace(std::vector<AssignmentRow>(r.begin(), r.end()), z);
  }
}

TaskAssignment CentralizedActionSpace::decode(std::size_t z) const {
  if (z >= count_) throw std::out_of_range("action index out of range");
  return concat_rows(rows(z), num_tasks_);
}

std::optional<std::size_t> CentralizedActionSpace::encode(const TaskAssignment& action) const {
  if (action.rows() != static_cast<std::size_t>(num_workstations_) ||
      action.cols() != static_cast<std::size_t>(num_tasks_))
    throw std::invalid_argument("action shape mismatch");
  std::vector<AssignmentRow> key(num_workstations_);
  for (int i = 0; i < num_workstations_; ++i) key[i] = row_of(action, i);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int CentralizedActionSpace::assigned_count(std::size_t z) const {
  int n = 0;
  for (AssignmentRow r : rows(z)) n += std::popcount(r);
  return n;
}

TaskAssignment concat_rows(std::span<const AssignmentRow> rows, int num_tasks) {
  if (num_tasks < 0 || num_tasks > 63) throw std::invalid_argument("concat_rows: bad task count");
  const AssignmentRow allowed = (AssignmentRow{1} << num_tasks) - 1;
  TaskAssignment a(rows.size(), num_tasks, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] & ~allowed) throw std::invalid_argument("concat_rows: row has bits beyond the task count");
    for (int j = 0; j < num_tasks; ++j) a(i, j) = (rows[i] >> j) & 1u;
  }
  return a;
}

AssignmentRow row_of(const TaskAssignment& action, int workstation) {
  AssignmentRow row = 0;
  for (std::size_t j = 0; j < action.cols(); ++j)
    if (action(workstation, j)) row |= AssignmentRow{1} << j;
  return row;
}

}  // namespace galb
