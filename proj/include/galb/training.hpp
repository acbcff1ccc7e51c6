#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "galb/action_space.hpp"
#include "galb/agents.hpp"
#include "galb/controller.hpp"

namespace galb {

/// One agent over the enumerated centralized action space.
class CentralController final : public Controller {
 public:
  CentralController(const FactoryConfig& config, const std::string& algorithm, const nlohmann::json& agent_config,
                    std::uint64_t seed, Masking masking = Masking::on, double penalty = -1.0,
                    const RewardConfig& reward = {});

  std::string mode() const override { return "central"; }
  std::string algorithm() const override { return agent_->algorithm(); }
  std::size_t num_learners() const override { return 1; }
  EpisodeLog train_episode(int episode, int total_episodes) override {
    return train_from(reset(config_), episode, total_episodes);
  }
  EpisodeLog train_from(const FactoryState& start, int episode, int total_episodes) override;
  int greedy_rollout(const FactoryState& start) override;
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& doc) override;

  const CentralizedActionSpace& space() const { return space_; }
  Agent& agent() { return *agent_; }

 private:
  ActionMask mask(const FactoryState& s) const;

  FactoryConfig config_;
  Masking masking_;
  double penalty_;
  RewardConfig reward_;
  CentralizedActionSpace space_;
  std::unique_ptr<Agent> agent_;
  Rng rng_;
};

/// Hidden width used when the agent config does not set one: 534 / 258 for the
/// centralized DQN / PPO networks and 178 / 86 per workstation agent.
std::size_t default_hidden_width(const std::string& algorithm, const std::string& mode);

/// Agent hyperparameters (JSON form of DqnConfig / PpoConfig) with the hidden
/// width filled in for the mode.
nlohmann::json default_agent_config(const std::string& algorithm, const std::string& mode);

std::unique_ptr<Controller> make_controller(const FactoryConfig& config, const std::string& algorithm,
                                            const std::string& mode, Masking masking, std::uint64_t seed,
                                            const nlohmann::json& agent_config, double penalty = -1.0);

/// Rebuilds a masked controller from a checkpoint document; mode, algorithm
/// and network shapes come from the document.
std::unique_ptr<Controller> controller_from_checkpoint(const FactoryConfig& config, const nlohmann::json& doc);

struct RunManifest {
  std::filesystem::path instance;  // empty: built-in reference line
  std::string algorithm = "ppo";   // dqn | ppo
  std::string mode = "central";    // central | multi
  Masking masking = Masking::on;
  std::vector<std::uint64_t> seeds{0};
  int episodes = 2000;
  std::filesystem::path out_dir = "runs";
  int window = 100;                 // trailing window for the convergence rule
  bool stop_on_convergence = false;
  double penalty = -1.0;            // reward added when an unmasked choice is infeasible
  double random_starts = 0.0;       // fraction of episodes started from a sampled reachable state
  int start_depth = 5;              // maximum random steps behind a sampled start
  nlohmann::json agent;             // overrides merged onto default_agent_config

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

/// Tracks the trailing-window median of k_end. Episodes that hit the horizon
/// count with k_end equal to the horizon.
class ConvergenceTracker {
 public:
  ConvergenceTracker(int window, int k_opt) : window_(window), k_opt_(k_opt) {}
  /// Records one episode; returns true when the window is full and its median equals k_opt.
  bool push(int k_end);
  std::optional<double> median() const;
  std::optional<int> converged_at() const { return converged_at_; }

 private:
  int window_;
  int k_opt_;
  int seen_ = 0;
  std::vector<int> recent_;
  std::optional<int> converged_at_;
};

struct SeedResult {
  std::uint64_t seed = 0;
  int episodes_run = 0;
  std::optional<int> converged_at;  // zero-based episode at which the window median first hit k_opt
  std::optional<double> final_median;
  int best_k_end = 0;
  ControllerTotals totals;
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  double seconds = 0.0;
};

struct TrainingReport {
  int k_opt = 0;
  std::vector<SeedResult> seeds;
};

/// Trains one controller per seed, writing <out>/<tag>_seed<k>.csv plus final
/// and best checkpoints. The best checkpoint is the one with the lowest greedy
/// rollout k_end, checked whenever the training k_end improves.
TrainingReport run_training(const RunManifest& manifest, const FactoryConfig& config, int k_opt);

std::string run_tag(const RunManifest& manifest);

/// Rolls a uniformly random feasible centralized action for a uniform number
/// of steps in [0, max_depth] from reset, stopping early if the episode ends.
FactoryState sample_reachable_state(const FactoryConfig& config, Rng& rng, int max_depth);

struct RobustnessSample {
  FactoryState state;
  bool oracle_feasible = false;
  int oracle_k = -1;  // optimum ending clock from the state
  int agent_k = -1;   // greedy rollout ending clock, -1 if unfinished
  bool oracle_budget_exhausted = false;
};

struct RobustnessReport {
  std::vector<RobustnessSample> samples;
  int evaluated = 0;  // samples with a feasible oracle optimum
  int excluded = 0;   // horizon-infeasible or oracle budget exhausted
  int optimal = 0;
  double fraction_optimal() const { return evaluated ? static_cast<double>(optimal) / evaluated : 0.0; }
};

RobustnessReport robustness_test(Controller& controller, const FactoryConfig& config, int n_samples, Rng& rng,
                                 int max_depth, std::uint64_t node_budget = 100'000'000);

/// Same report for a fixed list of start states.
RobustnessReport robustness_on(Controller& controller, const FactoryConfig& config,
                               const std::vector<FactoryState>& states, std::uint64_t node_budget = 100'000'000);

struct MaskAudit {
  std::size_t states = 0;
  std::size_t actions_checked = 0;
  std::size_t admitted = 0;
  std::size_t rejected = 0;
  std::size_t discrepancies = 0;
  std::vector<std::string> examples;  // first few discrepancies, for reports
};

/// Visits `n_states` states along random masked rollouts (restarting at reset
/// when an episode ends) and checks every centralized action: each admitted
/// action must transition without error into a state that passes the
/// invariants, and each rejected one must name a violated constraint that a
/// forced booking confirms.
MaskAudit audit_masks(const FactoryConfig& config, std::size_t n_states, Rng& rng);

struct GrowthRow {
  int tasks = 0;
  BigCount unconstrained, unique_assignment, occupancy_constrained, max_agent;
};

/// Action-space sizes for |J| = 1..max_tasks with the given occupancy caps.
std::vector<GrowthRow> growth_report(int max_tasks, const std::vector<int>& occupancy);
void write_growth_csv(const std::vector<GrowthRow>& rows, const std::filesystem::path& path);
void write_growth_csv(const std::vector<GrowthRow>& rows, std::ostream& out);

/// Degree of the polynomial through equally spaced `values`: one less than the
/// order of the first forward difference that is identically zero. nullopt if
/// no difference of order < values.size() vanishes.
std::optional<int> polynomial_degree(const std::vector<BigCount>& values);

}  // namespace galb
