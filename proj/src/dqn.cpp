#include <stdexcept>

#include "galb/agents.hpp"

namespace galb {

using nlohmann::json;

DqnAgent::DqnAgent(std::size_t obs_dim, std::size_t num_actions, DqnConfig config, std::uint64_t seed)
    : Agent(obs_dim, num_actions),
      config_(config),
      online_(DenseNetwork::mlp(obs_dim, config.hidden, num_actions, Activation::identity, seed)),
      target_(online_),
      optimizer_(online_.num_params(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.grad_clip}),
      memory_(config.memory),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      epsilon_(config.epsilon.start),
      grad_(online_.num_params(), 0.0) {
  if (config.batch_size == 0 || config.train_frequency <= 0 || config.target_sync <= 0)
    throw std::invalid_argument("DQN batch size, train frequency and target sync must be positive");
}

std::size_t DqnAgent::act(std::span<const double> obs, const ActionMask& mask, Rng& rng) {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon_) return uniform_feasible(mask, rng);
  return act_greedy(obs, mask);
}

std::size_t DqnAgent::act_greedy(std::span<const double> obs, const ActionMask& mask) const {
  return masked_argmax(online_.forward(obs), mask);
}

std::size_t DqnAgent::act_fictitious(std::span<const double> obs, const ActionMask& mask, Rng&) {
  return act_greedy(obs, mask);
}

void DqnAgent::begin_episode(int episode, int total_episodes) {
  epsilon_ = config_.epsilon.at(episode, total_episodes);
}

void DqnAgent::record(Experience e) { memory_.push(std::move(e)); }

std::optional<LearnStats> DqnAgent::maybe_learn() {
  ++env_steps_;
  if (memory_.size() < std::max(config_.warm_start, config_.batch_size)) return std::nullopt;
  if (env_steps_ % static_cast<std::uint64_t>(config_.train_frequency) != 0) return std::nullopt;
  const auto batch = memory_.sample_indices(config_.batch_size, rng_);
  LearnStats stats;
  stats.loss = learn_on(batch);
  return stats;
}

std::vector<double> DqnAgent::td_targets(std::span<const std::size_t> batch) const {
  const std::size_t B = batch.size(), A = num_actions_, S = obs_dim_;
  std::vector<double> next(B * S);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& e = memory_[batch[b]];
    std::copy(e.next_obs.begin(), e.next_obs.end(), next.begin() + static_cast<long>(b * S));
  }
  ForwardCache cache;
  target_.forward(next, B, cache);
  const auto q = cache.output();
  std::vector<double> y(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& e = memory_[batch[b]];
    y[b] = e.reward;
    if (!e.done) y[b] += config_.gamma * masked_max(q.subspan(b * A, A), e.next_mask);
  }
  return y;
}

double DqnAgent::learn_on(std::span<const std::size_t> batch) {
  const std::size_t B = batch.size(), A = num_actions_, S = obs_dim_;
  const std::vector<double> y = td_targets(batch);
  std::vector<double> obs(B * S);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& e = memory_[batch[b]];
    std::copy(e.obs.begin(), e.obs.end(), obs.begin() + static_cast<long>(b * S));
  }
  online_.forward(obs, B, cache_);
  const auto q = cache_.output();
  std::vector<double> dq(B * A, 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t a = memory_[batch[b]].action;
    const double err = q[b * A + a] - y[b];
    loss += err * err;
    dq[b * A + a] = 2.0 * err / static_cast<double>(B);
  }
  std::fill(grad_.begin(), grad_.end(), 0.0);
  online_.backward(cache_, dq, grad_);
  optimizer_.step(online_.params(), grad_);
  if (++learn_steps_ % static_cast<std::uint64_t>(config_.target_sync) == 0) soft_update();
  return loss / static_cast<double>(B);
}

void DqnAgent::soft_update() {
  auto t = target_.params();
  auto o = online_.params();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = (1.0 - config_.tau) * t[k] + config_.tau * o[k];
}

json DqnAgent::checkpoint() const {
  return json{{"algorithm", "dqn"},
              {"config", config_.to_json()},
              {"online", Checkpoint{online_, optimizer_}.to_json()},
              {"target", target_.to_json()},
              {"epsilon", epsilon_},
              {"env_steps", env_steps_},
              {"learn_steps", learn_steps_}};
}

void DqnAgent::restore(const json& doc) {
  if (doc.at("algorithm").get<std::string>() != "dqn") throw std::invalid_argument("checkpoint is not a DQN agent");
  Checkpoint online = Checkpoint::from_json(doc.at("online"));
  DenseNetwork target = DenseNetwork::from_json(doc.at("target"));
  if (online.network.input_size() != obs_dim_ || online.network.output_size() != num_actions_ ||
      target.layer_sizes() != online.network.layer_sizes())
    throw std::invalid_argument("checkpoint network shape does not match the action space");
  online_ = std::move(online.network);
  optimizer_ = std::move(online.optimizer);
  target_ = std::move(target);
  grad_.assign(online_.num_params(), 0.0);
  epsilon_ = doc.value("epsilon", epsilon_);
  env_steps_ = doc.value("env_steps", env_steps_);
  learn_steps_ = doc.value("learn_steps", learn_steps_);
}

}  // namespace galb
