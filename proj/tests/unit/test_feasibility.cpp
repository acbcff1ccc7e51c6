#include "doctest.h"

#include <algorithm>
#include <random>

#include "galb/action_space.hpp"
#include "galb/feasibility.hpp"
#include "galb/instance_io.hpp"
#include "galb/solver.hpp"
#include "oracles.hpp"

using namespace galb;

namespace {

TaskAssignment assign(const FactoryConfig& c, std::initializer_list<std::pair<int, int>> pairs) {
  TaskAssignment a = null_assignment(c);
  for (auto [i, j] : pairs) a(i, j) = 1;
  return a;
}

}  // namespace

TEST_CASE("named constraint violations on the reference line") {
  const FactoryConfig c = reference_instance();
  FactoryState s = reset(c);
  // Second task needs the first one finished.
  for (int i = 0; i < 3; ++i) CHECK(first_violation(s, assign(c, {{i, 1}}), c) == Violation::precedence);
  // Fifth task needs the first and fourth.
  CHECK(first_violation(s, assign(c, {{1, 4}}), c) == Violation::precedence);
  CHECK(first_violation(s, assign(c, {{0, 0}, {0, 2}}), c) == Violation::occupancy);
  CHECK(first_violation(s, assign(c, {{0, 0}, {1, 0}}), c) == Violation::unique_assignment);
  CHECK(first_violation(s, null_assignment(c), c) == Violation::none);

  // Third task on the second workstation takes 12 steps: too late from clock 9.
  s.clock = 9;
  CHECK(first_violation(s, assign(c, {{1, 2}}), c) == Violation::deadline);
  CHECK(first_violation(s, assign(c, {{2, 2}}), c) == Violation::none);  // 9 + 5 <= 20
}

TEST_CASE("finished, running, buffer and inventory violations") {
  FactoryConfig c = reference_instance();
  FactoryState s = reset(c);
  step_in_place(s, assign(c, {{2, 3}}), c, {});
  CHECK(first_violation(s, assign(c, {{0, 3}}), c) == Violation::task_executing);
  for (int k = 0; k < 3; ++k) step_in_place(s, null_assignment(c), c, {});
  REQUIRE(s.finished[3] == 1);
  CHECK(first_violation(s, assign(c, {{1, 3}}), c) == Violation::finished_task);

  FactoryConfig tight = reference_instance();
  tight.buffer_caps(1, 0) = 14;
  const FactoryState t = reset(tight);
  CHECK(first_violation(t, assign(tight, {{1, 0}, {1, 2}}), tight) == Violation::buffer_capacity);
  CHECK(first_violation(t, assign(tight, {{1, 0}}), tight) == Violation::none);

  FactoryConfig scarce = reference_instance();
  scarce.inventories = {16, 2000};
  const FactoryState u = reset(scarce);
  CHECK(first_violation(u, assign(scarce, {{0, 0}, {1, 2}}), scarce) == Violation::inventory);
  CHECK(first_violation(u, assign(scarce, {{0, 0}, {1, 3}}), scarce) == Violation::none);
}

TEST_CASE("shape mismatch is the only error") {
  const FactoryConfig c = reference_instance();
  CHECK_THROWS_AS(first_violation(reset(c), TaskAssignment(2, 5, 0), c), std::invalid_argument);
}

TEST_CASE("reset masks of the reference line") {
  const FactoryConfig c = reference_instance();
  const FactoryState s = reset(c);
  const CentralizedActionSpace space(c);
  const ActionMask m = centralized_mask(s, space, c);
  CHECK(m[0] == 1);
  CHECK(count_feasible(m) == 44);
  // Admitted exactly when only tasks 0, 2, 3 are used (zero-based).
  for (std::size_t z = 0; z < space.size(); ++z) {
    bool only_free = true;
    for (AssignmentRow row : space.rows(z)) only_free = only_free && (row & 0b10010) == 0;
    CHECK(m[z] == (only_free ? 1 : 0));
  }
  const AgentActionSpace first(c, 0);
  const ActionMask m0 = agent_mask(s, 0, first, c);
  CHECK(m0.size() == 6);
  CHECK(count_feasible(m0) == 4);
  for (std::size_t k = 0; k < first.size(); ++k)
    CHECK(m0[k] == (first.row(k) == 0 || first.row(k) == 0b1 || first.row(k) == 0b100 || first.row(k) == 0b1000));
}

TEST_CASE("terminal and saturated states admit only the null action") {
  const FactoryConfig c = reference_instance();
  const SolveResult best = solve(c);
  REQUIRE(best.feasible);
  FactoryState s = reset(c);
  std::size_t next = 0;
  while (!s.done) {
    TaskAssignment a = null_assignment(c);
    if (next < best.schedule.size() && best.schedule[next].clock == s.clock) a = best.schedule[next++].action;
    step_in_place(s, a, c, {});
  }
  const CentralizedActionSpace space(c);
  CHECK(count_feasible(centralized_mask(s, space, c)) == 1);

  FactoryState busy = reset(c);
  step_in_place(busy, assign(c, {{0, 3}, {1, 0}, {2, 2}}), c, {});
  // Workstation 0 and 2 are full, 1 still has room for two more tasks but all
  // remaining tasks wait on the first one.
  const ActionMask full = centralized_mask(busy, space, c);
  CHECK(count_feasible(full) == 1);
  for (int i : {0, 2}) CHECK(count_feasible(agent_mask(busy, i, AgentActionSpace(c, i), c)) == 1);
}

TEST_CASE("masks agree with the per-action reference on random instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const FactoryConfig c = trial == 0 ? reference_instance() : testing::random_instance(rng, 3, 5, 15);
    const CentralizedActionSpace space(c);
    std::vector<AgentActionSpace> agents;
    for (int i = 0; i < c.num_workstations; ++i) agents.emplace_back(c, i);
    FactoryState s = reset(c);
    while (!episode_over(s, c)) {
      const ActionMask m = centralized_mask(s, space, c);
      CHECK(m[0] == 1);
      for (std::size_t z = 0; z < space.size(); ++z) {
        const TaskAssignment a = space.decode(z);
        const Violation v = first_violation(s, a, c);
        REQUIRE(m[z] == (v == Violation::none ? 1 : 0));
        if (v != Violation::none) {
          FactoryState forced = s;
          apply_assignment(forced, a, c);
          const auto seen = audit_booking(s, forced, c);
          CHECK(std::find(seen.begin(), seen.end(), v) != seen.end());
        }
      }
      for (int i = 0; i < c.num_workstations; ++i) {
        const ActionMask mi = agent_mask(s, i, agents[i], c);
        for (std::size_t k = 0; k < agents[i].size(); ++k) {
          std::vector<AssignmentRow> rows(c.num_workstations, 0);
          rows[i] = agents[i].row(k);
          CHECK(mi[k] == (action_feasible(s, concat_rows(rows, c.num_tasks), c) ? 1 : 0));
        }
      }
      std::vector<std::size_t> admitted;
      for (std::size_t z = 0; z < space.size(); ++z)
        if (m[z]) admitted.push_back(z);
      const std::size_t pick = admitted[std::uniform_int_distribution<std::size_t>(0, admitted.size() - 1)(rng)];
      step_in_place(s, space.decode(pick), c, {});
      CHECK(check_state_invariants(s, c).empty());
    }
  }
}
