#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "galb/action_space.hpp"
#include "galb/agents.hpp"
#include "galb/controller.hpp"

namespace galb {

/// Copy of the real state on which proposed rows are booked without
/// advancing execution, plus the per-agent masks recomputed on it.
class FictitiousEnvironment {
 public:
  FictitiousEnvironment(const FactoryState& state, const FactoryConfig& config,
                        const std::vector<AgentActionSpace>& spaces);

  const FactoryState& state() const { return state_; }
  const ActionMask& mask(int agent) const { return masks_[agent]; }
  const std::vector<ActionMask>& masks() const { return masks_; }

  /// Books `row` for workstation `agent` and recomputes every mask. Throws
  /// FeasibilityError if the row is not admitted by the current mask.
  void book(int agent, AssignmentRow row);

 private:
  const FactoryConfig& config_;
  const std::vector<AgentActionSpace>& spaces_;
  FactoryState state_;
  std::vector<ActionMask> masks_;
};

/// Booking phase of a joint action on `state`: occupancies, allocations,
/// buffers and inventories change; remaining durations and the clock do not.
void fake_transition(FactoryState& state, const TaskAssignment& joint, const FactoryConfig& config);

/// Chooses an action index for `agent` given the fictitious observation and mask.
using FictitiousSelector = std::function<std::size_t(int agent, std::span<const double> obs, const ActionMask& mask)>;

struct CoordinationResult {
  std::vector<std::size_t> actions;  // one index per agent into its own space
  std::vector<int> order;            // visit order
  TaskAssignment joint;
};

/// Visits agents in a uniformly random order; each selects under its mask on
/// the fictitious state, and its choice is booked before the next agent
/// moves. The concatenated result is always feasible on `state`.
CoordinationResult sequential_feasibility_check(const FactoryState& state, const FactoryConfig& config,
                                                const std::vector<AgentActionSpace>& spaces,
                                                const FictitiousSelector& select, Rng& rng);

/// One agent per workstation trained with a shared reward (centralized
/// training, decentralized execution).
class MultiAgentController final : public Controller {
 public:
  MultiAgentController(const FactoryConfig& config, const std::string& algorithm, const nlohmann::json& agent_config,
                       std::uint64_t seed, Masking masking = Masking::on, double penalty = -1.0,
                       const RewardConfig& reward = {});

  std::string mode() const override { return "multi"; }
  std::string algorithm() const override { return algorithm_; }
  std::size_t num_learners() const override { return agents_.size(); }
  EpisodeLog train_episode(int episode, int total_episodes) override {
    return train_from(reset(config_), episode, total_episodes);
  }
  EpisodeLog train_from(const FactoryState& start, int episode, int total_episodes) override;
  int greedy_rollout(const FactoryState& start) override;
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& doc) override;

  const std::vector<AgentActionSpace>& spaces() const { return spaces_; }
  Agent& agent(int i) { return *agents_[i]; }

 private:
  std::vector<ActionMask> real_masks(const FactoryState& s) const;

  FactoryConfig config_;
  std::string algorithm_;
  Masking masking_;
  double penalty_;
  RewardConfig reward_;
  std::vector<AgentActionSpace> spaces_;
  std::vector<std::unique_ptr<Agent>> agents_;
  Rng rng_;
  Rng eval_rng_;
};

}  // namespace galb
