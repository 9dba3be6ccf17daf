// Minimal feed-forward softmax classifiers with explicit forward/backward
// passes. Everything is double precision; gradient-check tolerances and the
// oracle comparisons depend on it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tcgm/simplex.hpp"

namespace tcgm {

enum class Activation { kReLU, kTanh };

using Matrix = std::vector<std::vector<double>>;

// Parameters of one per-modality classifier. Hidden layers apply the chosen
// activation; the last layer feeds a softmax, so every forward row is a
// valid SimplexVector. Mutated only by step().
struct ClassifierNet {
  std::vector<int> layer_dims;  // input dim, hidden dims..., class count
  std::vector<Matrix> weights;  // weights[l][out][in]
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::kReLU;
  std::uint64_t rng_seed = 0;

  // Uniform(-a, a) init with a = sqrt(6 / (fan_in + fan_out)).
  static ClassifierNet init(std::vector<int> dims, Activation act, std::uint64_t seed);

  int input_dim() const { return layer_dims.front(); }
  int class_count() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> hidden;  // post-activation values per hidden layer
  Matrix outputs;              // softmax rows
};

// Deterministic given parameters. Rows of `batch` must have input_dim
// finite entries.
Matrix forward(const ClassifierNet& net, const Matrix& batch, ForwardCache* cache = nullptr);
std::vector<SimplexVector> forward_simplex(const ClassifierNet& net, const Matrix& batch,
                                           ForwardCache* cache = nullptr);

struct NetGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static NetGradients zeros_like(const ClassifierNet& net);
};

// upstream[i][c] = dL/d output[i][c], taken with respect to the post-softmax
// outputs. Requires the cache produced by the matching forward call.
NetGradients backward(const ClassifierNet& net, const ForwardCache& cache,
                      const Matrix& upstream);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct OptimizerState {
  enum class Kind { kSgd, kAdam };

  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;

  // Adam moment buffers, allocated on the first step.
  std::vector<Matrix> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  long step_count = 0;

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr);
};

// SGD: theta -= lr * g. Adam: bias-corrected update with the fixed defaults
// above. Throws on non-finite gradients.
void step(ClassifierNet& net, const NetGradients& grads, OptimizerState& state);

// JSON checkpoint: layer dims, activation, flat parameters, optimizer state
// and the seed the net was initialized from.
std::string checkpoint_to_json(const ClassifierNet& net, const OptimizerState* opt = nullptr);

struct Checkpoint {
  ClassifierNet net;
  bool has_optimizer = false;
  OptimizerState optimizer;
};
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace tcgm
