#include "galb/agents.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace galb {

using nlohmann::json;

std::size_t masked_argmax(std::span<const double> values, const ActionMask& mask) {
  std::size_t best = values.size();
  for (std::size_t k = 0; k < values.size(); ++k)
    if (mask[k] && (best == values.size() || values[k] > values[best])) best = k;
  if (best == values.size()) throw std::invalid_argument("mask admits no action");
  return best;
}

std::size_t uniform_feasible(const ActionMask& mask, Rng& rng) {
  const std::size_t n = count_feasible(mask);
  if (n == 0) throw std::invalid_argument("mask admits no action");
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k] && pick-- == 0) return k;
  return mask.size();  // unreachable
}

std::size_t masked_epsilon_greedy(std::span<const double> q, const ActionMask& mask, double epsilon, Rng& rng) {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) return uniform_feasible(mask, rng);
  return masked_argmax(q, mask);
}

std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& mask) {
  std::vector<double> p(logits.size(), 0.0);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (mask[k]) top = std::max(top, logits[k]);
  if (!std::isfinite(top)) throw std::invalid_argument("mask admits no action");
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (mask[k]) sum += p[k] = std::exp(logits[k] - top);
  for (double& v : p) v /= sum;
  return p;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::size_t last = probs.size();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    last = k;
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  // Rounding left a sliver of mass; fall back to the last positive entry.
  if (last == probs.size()) throw std::invalid_argument("distribution has no positive entry");
  return last;
}

double masked_max(std::span<const double> values, const ActionMask& mask) {
  return values[masked_argmax(values, mask)];
}

double EpsilonSchedule::at(int episode, int total_episodes) const {
  const double span = fraction * total_episodes;
  if (span <= 0.0) return end;
  const double progress = std::min(1.0, episode / span);
  return start + (end - start) * progress;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
  } else {
    data_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (count > data_.size()) throw std::invalid_argument("batch larger than replay contents");
  // Floyd's algorithm: `count` distinct draws from [0, size).
  std::vector<std::size_t> out;
  std::unordered_set<std::size_t> taken;
  const std::size_t n = data_.size();
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    const std::size_t pick = taken.insert(t).second ? t : j;
    if (pick == j) taken.insert(j);
    out.push_back(pick);
  }
  return out;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("rollout fields differ in length");
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : last_value;
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    running = delta + gamma * lambda * live * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

// ---- configs ----------------------------------------------------------------

json DqnConfig::to_json() const {
  return json{{"hidden", hidden},
              {"learning_rate", learning_rate},
              {"gamma", gamma},
              {"batch_size", batch_size},
              {"memory", memory},
              {"warm_start", warm_start},
              {"grad_clip", grad_clip},
              {"target_sync", target_sync},
              {"tau", tau},
              {"train_frequency", train_frequency},
              {"epsilon_start", epsilon.start},
              {"epsilon_end", epsilon.end},
              {"epsilon_fraction", epsilon.fraction}};
}

DqnConfig DqnConfig::from_json(const json& doc) {
  DqnConfig c;
  c.hidden = doc.value("hidden", c.hidden);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.gamma = doc.value("gamma", c.gamma);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.memory = doc.value("memory", c.memory);
  c.warm_start = doc.value("warm_start", c.warm_start);
  c.grad_clip = doc.value("grad_clip", c.grad_clip);
  c.target_sync = doc.value("target_sync", c.target_sync);
  c.tau = doc.value("tau", c.tau);
  c.train_frequency = doc.value("train_frequency", c.train_frequency);
  c.epsilon.start = doc.value("epsilon_start", c.epsilon.start);
  c.epsilon.end = doc.value("epsilon_end", c.epsilon.end);
  c.epsilon.fraction = doc.value("epsilon_fraction", c.epsilon.fraction);
  return c;
}

json PpoConfig::to_json() const {
  return json{{"hidden", hidden},
              {"learning_rate", learning_rate},
              {"gamma", gamma},
              {"lambda", lambda},
              {"clip", clip},
              {"epochs", epochs},
              {"minibatch", minibatch},
              {"rollout", rollout},
              {"entropy_coef", entropy_coef},
              {"value_coef", value_coef},
              {"max_grad_norm", max_grad_norm},
              {"normalize_advantages", normalize_advantages},
              {"anneal_lr", anneal_lr}};
}

PpoConfig PpoConfig::from_json(const json& doc) {
  PpoConfig c;
  c.hidden = doc.value("hidden", c.hidden);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.gamma = doc.value("gamma", c.gamma);
  c.lambda = doc.value("lambda", c.lambda);
  c.clip = doc.value("clip", c.clip);
  c.epochs = doc.value("epochs", c.epochs);
  c.minibatch = doc.value("minibatch", c.minibatch);
  c.rollout = doc.value("rollout", c.rollout);
  c.entropy_coef = doc.value("entropy_coef", c.entropy_coef);
  c.value_coef = doc.value("value_coef", c.value_coef);
  c.max_grad_norm = doc.value("max_grad_norm", c.max_grad_norm);
  c.normalize_advantages = doc.value("normalize_advantages", c.normalize_advantages);
  c.anneal_lr = doc.value("anneal_lr", c.anneal_lr);
  return c;
}

std::unique_ptr<Agent> make_agent(const std::string& algorithm, std::size_t obs_dim, std::size_t num_actions,
                                  const json& config, std::uint64_t seed) {
  if (algorithm == "dqn") return std::make_unique<DqnAgent>(obs_dim, num_actions, DqnConfig::from_json(config), seed);
  if (algorithm == "ppo") return std::make_unique<PpoAgent>(obs_dim, num_actions, PpoConfig::from_json(config), seed);
  throw std::invalid_argument("unknown algorithm '" + algorithm + "' (expected dqn or ppo)");
}

}  // namespace galb
