#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "galb/feasibility.hpp"
#include "galb/network.hpp"

namespace galb {

using Rng = std::mt19937_64;

// ---- masking primitives -------------------------------------------------

/// Index of the largest value among entries with mask 1 (lowest index on ties).
std::size_t masked_argmax(std::span<const double> values, const ActionMask& mask);

/// Uniform choice among entries with mask 1.
std::size_t uniform_feasible(const ActionMask& mask, Rng& rng);

/// With probability epsilon a uniform feasible index, otherwise masked_argmax.
std::size_t masked_epsilon_greedy(std::span<const double> q, const ActionMask& mask, double epsilon, Rng& rng);

/// Softmax with masked logits set to -inf: masked entries are exactly zero.
std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& mask);

std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

/// max over mask-feasible entries.
double masked_max(std::span<const double> values, const ActionMask& mask);

/// Linear decay from start to end over the first `fraction` of the episodes,
/// constant afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double fraction = 0.6;
  double at(int episode, int total_episodes) const;
};

// ---- learner-facing records --------------------------------------------

/// One environment step as seen by one agent.
struct Experience {
  std::vector<double> obs;
  std::size_t action = 0;
  double log_prob = 0.0;  // log p_f(action), PPO only
  double value = 0.0;     // critic estimate at obs, PPO only
  double reward = 0.0;
  bool done = false;
  ActionMask mask;
  std::vector<double> next_obs;
  ActionMask next_mask;
};

struct LearnStats {
  double loss = 0.0;          // TD loss (DQN) or policy loss (PPO)
  double value_loss = 0.0;    // PPO
  double entropy = 0.0;       // PPO
  double grad_norm = 0.0;
};

/// Ring buffer of transitions with uniform sampling without replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Experience e);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t k) const { return data_[k]; }
  /// `count` distinct indices, uniformly at random.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> data_;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation over a time-ordered rollout. `last_value`
/// bootstraps the step after the final record when that record is not done.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma, double lambda);

/// PPO clipped surrogate for one sample: min(ratio*A, clip(ratio)*A).
double clipped_surrogate(double ratio, double advantage, double clip);

// ---- agents ---------------------------------------------------------------

struct DqnConfig {
  std::size_t hidden = 534;
  double learning_rate = 1e-5;
  double gamma = 0.995;
  std::size_t batch_size = 64;
  std::size_t memory = 100000;
  std::size_t warm_start = 200;
  double grad_clip = 1.0;
  int target_sync = 10;     // learn steps between soft updates
  double tau = 0.8;         // weight of the online network in a soft update
  int train_frequency = 4;  // environment steps between learn steps
  EpsilonSchedule epsilon;
  nlohmann::json to_json() const;
  static DqnConfig from_json(const nlohmann::json& doc);
};

struct PpoConfig {
  std::size_t hidden = 258;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  std::size_t minibatch = 5;
  std::size_t rollout = 20;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  bool anneal_lr = false;  // linear decay of the learning rate to zero over the episode budget
  nlohmann::json to_json() const;
  static PpoConfig from_json(const nlohmann::json& doc);
};

/// Common learner interface over (observation, mask, action index).
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string algorithm() const = 0;
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t num_actions() const { return num_actions_; }

  /// Training-time behaviour: epsilon-greedy (DQN) or sampling from p_f (PPO).
  virtual std::size_t act(std::span<const double> obs, const ActionMask& mask, Rng& rng) = 0;
  /// Deterministic inference: masked argmax of Q or of p_f.
  virtual std::size_t act_greedy(std::span<const double> obs, const ActionMask& mask) const = 0;
  /// Choice made inside the sequential feasibility check: greedy for DQN,
  /// sampled for PPO.
  virtual std::size_t act_fictitious(std::span<const double> obs, const ActionMask& mask, Rng& rng) = 0;

  virtual double value(std::span<const double>) const { return 0.0; }
  virtual double log_prob(std::span<const double>, std::size_t, const ActionMask&) const { return 0.0; }

  virtual void begin_episode(int episode, int total_episodes) = 0;
  virtual void record(Experience e) = 0;
  /// Called after every environment step; runs a learning phase when due.
  virtual std::optional<LearnStats> maybe_learn() = 0;
  /// Exploration level reported in metrics: epsilon (DQN) or the entropy of
  /// the last policy (PPO).
  virtual double exploration() const = 0;

  virtual nlohmann::json checkpoint() const = 0;
  virtual void restore(const nlohmann::json& doc) = 0;

 protected:
  Agent(std::size_t obs_dim, std::size_t num_actions) : obs_dim_(obs_dim), num_actions_(num_actions) {}
  std::size_t obs_dim_;
  std::size_t num_actions_;
};

class DqnAgent final : public Agent {
 public:
  DqnAgent(std::size_t obs_dim, std::size_t num_actions, DqnConfig config, std::uint64_t seed);

  std::string algorithm() const override { return "dqn"; }
  std::size_t act(std::span<const double> obs, const ActionMask& mask, Rng& rng) override;
  std::size_t act_greedy(std::span<const double> obs, const ActionMask& mask) const override;
  std::size_t act_fictitious(std::span<const double> obs, const ActionMask& mask, Rng& rng) override;
  void begin_episode(int episode, int total_episodes) override;
  void record(Experience e) override;
  std::optional<LearnStats> maybe_learn() override;
  double exploration() const override { return epsilon_; }
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& doc) override;

  std::vector<double> q_values(std::span<const double> obs) const { return online_.forward(obs); }

  /// TD targets r + gamma (1 - done) max_{a' feasible} Q_target(s', a').
  std::vector<double> td_targets(std::span<const std::size_t> batch) const;
  /// One gradient step on the given transitions; returns the mean squared TD error.
  double learn_on(std::span<const std::size_t> batch);
  void soft_update();

  const DqnConfig& config() const { return config_; }
  DenseNetwork& online() { return online_; }
  DenseNetwork& target() { return target_; }
  const ReplayBuffer& memory() const { return memory_; }
  Adam& optimizer() { return optimizer_; }
  std::uint64_t learn_steps() const { return learn_steps_; }

 private:
  DqnConfig config_;
  DenseNetwork online_, target_;
  Adam optimizer_;
  ReplayBuffer memory_;
  Rng rng_;
  double epsilon_ = 1.0;
  std::uint64_t env_steps_ = 0;
  std::uint64_t learn_steps_ = 0;
  ForwardCache cache_, target_cache_;
  std::vector<double> grad_;
};

class PpoAgent final : public Agent {
 public:
  PpoAgent(std::size_t obs_dim, std::size_t num_actions, PpoConfig config, std::uint64_t seed);

  std::string algorithm() const override { return "ppo"; }
  std::size_t act(std::span<const double> obs, const ActionMask& mask, Rng& rng) override;
  std::size_t act_greedy(std::span<const double> obs, const ActionMask& mask) const override;
  std::size_t act_fictitious(std::span<const double> obs, const ActionMask& mask, Rng& rng) override;
  double value(std::span<const double> obs) const override;
  /// log p_f(action | obs, mask) under the current policy. Throws
  /// std::invalid_argument if the action is masked.
  double log_prob(std::span<const double> obs, std::size_t action, const ActionMask& mask) const override;
  void begin_episode(int episode, int total_episodes) override;
  void record(Experience e) override;
  std::optional<LearnStats> maybe_learn() override;
  double exploration() const override { return last_entropy_; }
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& doc) override;

  std::vector<double> policy(std::span<const double> obs, const ActionMask& mask) const;
  /// Full learning phase over the current rollout, which is then cleared.
  LearnStats learn();

  const PpoConfig& config() const { return config_; }
  DenseNetwork& actor() { return actor_; }
  DenseNetwork& critic() { return critic_; }
  const std::vector<Experience>& rollout() const { return rollout_; }

 private:
  PpoConfig config_;
  DenseNetwork actor_, critic_;
  Adam actor_opt_, critic_opt_;
  Rng rng_;
  std::vector<Experience> rollout_;
  double last_entropy_ = 0.0;
  ForwardCache actor_cache_, critic_cache_;
  std::vector<double> actor_grad_, critic_grad_;
};

std::unique_ptr<Agent> make_agent(const std::string& algorithm, std::size_t obs_dim, std::size_t num_actions,
                                  const nlohmann::json& config, std::uint64_t seed);

}  // namespace galb
