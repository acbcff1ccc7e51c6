#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace galb {

enum class Activation { identity, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& tag);

/// Activations kept from a batched forward pass. values[0] is the input,
/// values[L] the output; every entry is batch x width row-major.
struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> values;
  std::span<const double> output() const { return values.back(); }
};

/// Fully connected stack. Hidden layers use tanh; the output layer uses the
/// configured head activation (identity for Q-values, values and logits).
/// Parameters live in one flat vector: for each layer, W (out x in, row-major)
/// followed by the bias.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  DenseNetwork(std::vector<std::size_t> layer_sizes, Activation head, std::uint64_t seed);

  /// input, three equal hidden layers, output.
  static DenseNetwork mlp(std::size_t input, std::size_t hidden, std::size_t output, Activation head,
                          std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  Activation head() const { return head_; }
  Activation activation(std::size_t layer) const;
  std::uint64_t seed() const { return seed_; }

  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> inputs, std::size_t batch, ForwardCache& cache) const;

  /// Accumulates dLoss/dparams into grad (length num_params()) given
  /// dLoss/doutput for the batch held in cache.
  void backward(const ForwardCache& cache, std::span<const double> grad_output, std::span<double> grad) const;

  bool all_finite() const;

  nlohmann::json to_json() const;
  static DenseNetwork from_json(const nlohmann::json& doc);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + sizes_[layer + 1] * sizes_[layer]; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Activation head_ = Activation::identity;
  std::uint64_t seed_ = 0;
  std::vector<double> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> clip_norm;
};

/// Rescales grad in place so its L2 norm is at most max_norm. Returns the norm
/// before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t num_params, AdamConfig config);

  /// One bias-corrected update. Clips grad in place first when clip_norm is
  /// set. Returns the pre-clip gradient norm.
  double step(std::span<double> params, std::span<double> grad);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& doc);

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Network plus its optimizer, the unit saved to and restored from disk.
struct Checkpoint {
  DenseNetwork network;
  Adam optimizer;
  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& doc);
};

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace galb
