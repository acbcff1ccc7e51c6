#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "galb/factory.hpp"

namespace galb {

enum class Masking { on, off };

/// Per-episode training record. Vectors hold one entry per learner (one for
/// the centralized controller, |I| for the multi-agent pool); loss entries are
/// averages over the learning phases that ran during the episode, NaN if none.
struct EpisodeLog {
  int episode = 0;
  int start_clock = 0;     // nonzero when the episode began from a sampled state
  int k_end = 0;           // clock when the episode stopped
  bool completed = false;  // every task finished within the horizon
  double cumulative_reward = 0.0;
  std::vector<double> loss;
  std::vector<double> value_loss;
  std::vector<double> exploration;
  int steps = 0;
  int coordination_calls = 0;  // sequential feasibility checks run
  int penalties = 0;           // infeasible choices replaced by the null action
};

/// Counters accumulated over the lifetime of a controller.
struct ControllerTotals {
  std::uint64_t steps = 0;
  std::uint64_t coordination_calls = 0;
  std::uint64_t penalties = 0;
  std::uint64_t infeasible_executed = 0;  // must stay zero
};

/// Something that can be trained on a factory instance and rolled out
/// greedily: either one centralized agent or a pool of workstation agents.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string mode() const = 0;
  virtual std::string algorithm() const = 0;
  virtual std::size_t num_learners() const = 0;

  /// Runs one training episode from reset. `episode` is zero-based.
  virtual EpisodeLog train_episode(int episode, int total_episodes) = 0;
  /// Same, starting from an arbitrary reachable state.
  virtual EpisodeLog train_from(const FactoryState& start, int episode, int total_episodes) = 0;

  /// Deterministic-policy rollout from `start` with no learning. Returns the
  /// ending clock, or -1 when the horizon is reached with tasks unfinished.
  virtual int greedy_rollout(const FactoryState& start) = 0;

  virtual nlohmann::json checkpoint() const = 0;
  virtual void restore(const nlohmann::json& doc) = 0;

  const ControllerTotals& totals() const { return totals_; }

 protected:
  ControllerTotals totals_;
};

}  // namespace galb
