#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "galb/agents.hpp"

namespace galb {

using nlohmann::json;

PpoAgent::PpoAgent(std::size_t obs_dim, std::size_t num_actions, PpoConfig config, std::uint64_t seed)
    : Agent(obs_dim, num_actions),
      config_(config),
      actor_(DenseNetwork::mlp(obs_dim, config.hidden, num_actions, Activation::identity, seed)),
      critic_(DenseNetwork::mlp(obs_dim, config.hidden, 1, Activation::identity, seed + 1)),
      actor_opt_(actor_.num_params(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.max_grad_norm}),
      critic_opt_(critic_.num_params(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.max_grad_norm}),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      actor_grad_(actor_.num_params(), 0.0),
      critic_grad_(critic_.num_params(), 0.0) {
  if (config.rollout == 0 || config.minibatch == 0 || config.epochs <= 0)
    throw std::invalid_argument("PPO rollout, minibatch and epochs must be positive");
}

std::vector<double> PpoAgent::policy(std::span<const double> obs, const ActionMask& mask) const {
  return masked_softmax(actor_.forward(obs), mask);
}

std::size_t PpoAgent::act(std::span<const double> obs, const ActionMask& mask, Rng& rng) {
  return sample_categorical(policy(obs, mask), rng);
}

std::size_t PpoAgent::act_greedy(std::span<const double> obs, const ActionMask& mask) const {
  return masked_argmax(actor_.forward(obs), mask);
}

std::size_t PpoAgent::act_fictitious(std::span<const double> obs, const ActionMask& mask, Rng& rng) {
  return act(obs, mask, rng);
}

double PpoAgent::value(std::span<const double> obs) const { return critic_.forward(obs)[0]; }

double PpoAgent::log_prob(std::span<const double> obs, std::size_t action, const ActionMask& mask) const {
  if (action >= mask.size() || !mask[action]) throw std::invalid_argument("action is masked out");
  return std::log(policy(obs, mask)[action]);
}

void PpoAgent::begin_episode(int episode, int total_episodes) {
  if (!config_.anneal_lr || total_episodes <= 0) return;
  const double lr = config_.learning_rate * (1.0 - static_cast<double>(episode) / total_episodes);
  actor_opt_.set_learning_rate(lr);
  critic_opt_.set_learning_rate(lr);
}

void PpoAgent::record(Experience e) { rollout_.push_back(std::move(e)); }

std::optional<LearnStats> PpoAgent::maybe_learn() {
  if (rollout_.size() < config_.rollout) return std::nullopt;
  return learn();
}

LearnStats PpoAgent::learn() {
  LearnStats stats;
  const std::size_t n = rollout_.size();
  if (n == 0) return stats;
  const std::size_t A = num_actions_, S = obs_dim_;

  std::vector<double> rewards(n), values(n);
  std::vector<std::uint8_t> dones(n);
  for (std::size_t t = 0; t < n; ++t) {
    rewards[t] = rollout_[t].reward;
    values[t] = rollout_[t].value;
    dones[t] = rollout_[t].done;
  }
  const double last_value = rollout_.back().done ? 0.0 : value(rollout_.back().next_obs);
  GaeResult gae = compute_gae(rewards, values, dones, last_value, config_.gamma, config_.lambda);
  if (config_.normalize_advantages && n > 1) {
    const double mean = std::accumulate(gae.advantages.begin(), gae.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : gae.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : gae.advantages) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> obs, dlogits, dvalue;
  std::size_t updates = 0;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start < n; start += config_.minibatch) {
      const std::size_t B = std::min(config_.minibatch, n - start);
      obs.assign(B * S, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& e = rollout_[order[start + b]];
        std::copy(e.obs.begin(), e.obs.end(), obs.begin() + static_cast<long>(b * S));
      }
      actor_.forward(obs, B, actor_cache_);
      critic_.forward(obs, B, critic_cache_);
      const auto logits = actor_cache_.output();
      const auto v = critic_cache_.output();
      dlogits.assign(B * A, 0.0);
      dvalue.assign(B, 0.0);
      double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t t = order[start + b];
        const auto& e = rollout_[t];
        const auto p = masked_softmax(logits.subspan(b * A, A), e.mask);
        const double adv = gae.advantages[t];
        const double ratio = std::exp(std::log(p[e.action]) - e.log_prob);
        policy_loss -= clipped_surrogate(ratio, adv, config_.clip);
        // The unclipped branch carries the gradient unless clipping binds.
        const bool clipped = (adv > 0.0 && ratio > 1.0 + config_.clip) || (adv < 0.0 && ratio < 1.0 - config_.clip);
        const double dlogp = clipped ? 0.0 : -adv * ratio;
        double h = 0.0;
        for (std::size_t k = 0; k < A; ++k)
          if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
        entropy += h;
        for (std::size_t k = 0; k < A; ++k) {
          if (!e.mask[k]) continue;
          double g = dlogp * ((k == e.action ? 1.0 : 0.0) - p[k]);
          // d(-c H)/dz_k = c p_k (log p_k + H)
          if (p[k] > 0.0) g += config_.entropy_coef * p[k] * (std::log(p[k]) + h);
          dlogits[b * A + k] = g / static_cast<double>(B);
        }
        const double err = v[b] - gae.returns[t];
        value_loss += err * err;
        dvalue[b] = config_.value_coef * 2.0 * err / static_cast<double>(B);
      }
      std::fill(actor_grad_.begin(), actor_grad_.end(), 0.0);
      std::fill(critic_grad_.begin(), critic_grad_.end(), 0.0);
      actor_.backward(actor_cache_, dlogits, actor_grad_);
      critic_.backward(critic_cache_, dvalue, critic_grad_);
      stats.grad_norm += actor_opt_.step(actor_.params(), actor_grad_);
      critic_opt_.step(critic_.params(), critic_grad_);
      stats.loss += policy_loss / B;
      stats.value_loss += value_loss / B;
      stats.entropy += entropy / B;
      ++updates;
    }
  }
  stats.loss /= updates;
  stats.value_loss /= updates;
  stats.entropy /= updates;
  stats.grad_norm /= updates;
  last_entropy_ = stats.entropy;
  rollout_.clear();
  return stats;
}

json PpoAgent::checkpoint() const {
  return json{{"algorithm", "ppo"},
              {"config", config_.to_json()},
              {"actor", Checkpoint{actor_, actor_opt_}.to_json()},
              {"critic", Checkpoint{critic_, critic_opt_}.to_json()}};
}

void PpoAgent::restore(const json& doc) {
  if (doc.at("algorithm").get<std::string>() != "ppo") throw std::invalid_argument("checkpoint is not a PPO agent");
  Checkpoint actor = Checkpoint::from_json(doc.at("actor"));
  Checkpoint critic = Checkpoint::from_json(doc.at("critic"));
  if (actor.network.input_size() != obs_dim_ || actor.network.output_size() != num_actions_ ||
      critic.network.input_size() != obs_dim_ || critic.network.output_size() != 1)
    throw std::invalid_argument("checkpoint network shape does not match the action space");
  actor_ = std::move(actor.network);
  actor_opt_ = std::move(actor.optimizer);
  critic_ = std::move(critic.network);
  critic_opt_ = std::move(critic.optimizer);
  actor_grad_.assign(actor_.num_params(), 0.0);
  critic_grad_.assign(critic_.num_params(), 0.0);
  rollout_.clear();
}

}  // namespace galb
