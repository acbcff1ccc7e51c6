#include "galb/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "galb/kernels.hpp"

namespace galb {

using nlohmann::json;

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& tag) {
  if (tag == "tanh") return Activation::tanh;
  if (tag == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + tag + "'");
}

DenseNetwork::DenseNetwork(std::vector<std::size_t> layer_sizes, Activation head, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), head_(head), seed_(seed) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least an input and an output layer");
  for (std::size_t s : sizes_)
    if (s == 0) throw std::invalid_argument("layer widths must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t n = sizes_[l + 1] * sizes_[l];
    for (std::size_t k = 0; k < n; ++k) params_[weight_offset(l) + k] = dist(rng);
  }
}

DenseNetwork DenseNetwork::mlp(std::size_t input, std::size_t hidden, std::size_t output, Activation head,
                               std::uint64_t seed) {
  return DenseNetwork({input, hidden, hidden, hidden, output}, head, seed);
}

Activation DenseNetwork::activation(std::size_t layer) const {
  return layer + 1 == num_layers() ? head_ : Activation::tanh;
}

std::span<const double> DenseNetwork::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer), sizes_[layer + 1] * sizes_[layer]);
}

std::span<const double> DenseNetwork::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}

std::vector<double> DenseNetwork::forward(std::span<const double> input) const {
  ForwardCache cache;
  forward(input, 1, cache);
  return cache.values.back();
}

void DenseNetwork::forward(std::span<const double> inputs, std::size_t batch, ForwardCache& cache) const {
  if (inputs.size() != batch * input_size())
    throw std::invalid_argument("network input has length " + std::to_string(inputs.size()) + ", expected " +
                                std::to_string(batch * input_size()));
  cache.batch = batch;
  cache.values.resize(sizes_.size());
  cache.values[0].assign(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < num_layers(); ++l) {
    auto& y = cache.values[l + 1];
    y.resize(batch * sizes_[l + 1]);
    kernels::affine_forward(cache.values[l], batch, sizes_[l], weights(l), bias(l), sizes_[l + 1], y);
    if (activation(l) == Activation::tanh) kernels::tanh_inplace(y);
  }
}

void DenseNetwork::backward(const ForwardCache& cache, std::span<const double> grad_output,
                            std::span<double> grad) const {
  const std::size_t batch = cache.batch;
  if (grad_output.size() != batch * output_size()) throw std::invalid_argument("output gradient shape mismatch");
  if (grad.size() != num_params()) throw std::invalid_argument("parameter gradient shape mismatch");
  std::vector<double> delta(grad_output.begin(), grad_output.end());
  std::vector<double> next;
  for (std::size_t l = num_layers(); l-- > 0;) {
    if (activation(l) == Activation::tanh) kernels::tanh_backward(cache.values[l + 1], delta);
    kernels::affine_backward_params(cache.values[l], delta, batch, sizes_[l], sizes_[l + 1],
                                    grad.subspan(weight_offset(l), sizes_[l + 1] * sizes_[l]),
                                    grad.subspan(bias_offset(l), sizes_[l + 1]));
    if (l == 0) break;
    next.resize(batch * sizes_[l]);
    kernels::affine_backward_input(delta, batch, sizes_[l], weights(l), sizes_[l + 1], next);
    delta.swap(next);
  }
}

bool DenseNetwork::all_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

json DenseNetwork::to_json() const {
  json weights_out = json::array(), biases_out = json::array(), acts = json::array();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    auto w = weights(l);
    auto b = bias(l);
    weights_out.push_back(std::vector<double>(w.begin(), w.end()));
    biases_out.push_back(std::vector<double>(b.begin(), b.end()));
    acts.push_back(to_string(activation(l)));
  }
  return json{{"layer_sizes", sizes_}, {"activations", acts}, {"weights", weights_out},
              {"biases", biases_out},  {"seed", seed_}};
}

DenseNetwork DenseNetwork::from_json(const json& doc) {
  const auto sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
  const auto acts = doc.at("activations").get<std::vector<std::string>>();
  if (acts.size() + 1 != sizes.size()) throw std::invalid_argument("checkpoint activation count mismatch");
  for (std::size_t l = 0; l + 1 < acts.size(); ++l)
    if (activation_from_string(acts[l]) != Activation::tanh)
      throw std::invalid_argument("checkpoint hidden layers must be tanh");
  DenseNetwork net(sizes, activation_from_string(acts.back()), doc.value("seed", std::uint64_t{0}));
  const json& w = doc.at("weights");
  const json& b = doc.at("biases");
  if (w.size() != net.num_layers() || b.size() != net.num_layers())
    throw std::invalid_argument("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto wl = w[l].get<std::vector<double>>();
    const auto bl = b[l].get<std::vector<double>>();
    if (wl.size() != sizes[l + 1] * sizes[l] || bl.size() != sizes[l + 1])
      throw std::invalid_argument("checkpoint layer " + std::to_string(l) + " has the wrong shape");
    std::copy(wl.begin(), wl.end(), net.params_.begin() + static_cast<long>(net.weight_offset(l)));
    std::copy(bl.begin(), bl.end(), net.params_.begin() + static_cast<long>(net.bias_offset(l)));
  }
  return net;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

Adam::Adam(std::size_t num_params, AdamConfig config) : config_(config), m_(num_params, 0.0), v_(num_params, 0.0) {}

double Adam::step(std::span<double> params, std::span<double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("optimizer shape mismatch");
  double norm;
  if (config_.clip_norm) {
    norm = clip_global_norm(grad, *config_.clip_norm);
  } else {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    norm = std::sqrt(sq);
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  const std::size_t n = params.size();
  for (std::size_t k = 0; k < n; ++k) {
    m_[k] = b1 * m_[k] + (1.0 - b1) * grad[k];
    v_[k] = b2 * v_[k] + (1.0 - b2) * grad[k] * grad[k];
    params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps);
  }
  return norm;
}

json Adam::to_json() const {
  json doc{{"learning_rate", config_.learning_rate},
           {"beta1", config_.beta1},
           {"beta2", config_.beta2},
           {"epsilon", config_.epsilon},
           {"step", t_},
           {"m", m_},
           {"v", v_}};
  doc["clip_norm"] = config_.clip_norm ? json(*config_.clip_norm) : json(nullptr);
  return doc;
}

Adam Adam::from_json(const json& doc) {
  AdamConfig cfg;
  cfg.learning_rate = doc.at("learning_rate").get<double>();
  cfg.beta1 = doc.at("beta1").get<double>();
  cfg.beta2 = doc.at("beta2").get<double>();
  cfg.epsilon = doc.at("epsilon").get<double>();
  if (doc.contains("clip_norm") && !doc.at("clip_norm").is_null()) cfg.clip_norm = doc.at("clip_norm").get<double>();
  Adam opt;
  opt.config_ = cfg;
  opt.t_ = doc.at("step").get<std::uint64_t>();
  opt.m_ = doc.at("m").get<std::vector<double>>();
  opt.v_ = doc.at("v").get<std::vector<double>>();
  if (opt.m_.size() != opt.v_.size()) throw std::invalid_argument("optimizer moment shapes differ");
  return opt;
}

json Checkpoint::to_json() const { return json{{"network", network.to_json()}, {"optimizer", optimizer.to_json()}}; }

Checkpoint Checkpoint::from_json(const json& doc) {
  Checkpoint c{DenseNetwork::from_json(doc.at("network")), Adam::from_json(doc.at("optimizer"))};
  if (c.optimizer.first_moment().size() != c.network.num_params())
    throw std::invalid_argument("optimizer moments do not match network parameters");
  return c;
}

void write_json(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump() << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

}  // namespace galb
