#include "tcgm/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tcgm/rng.hpp"

namespace tcgm {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw std::invalid_argument("ClassifierNet: need at least input and output dims");
  }
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("ClassifierNet: layer dims must be >= 1");
  }
}

double activate(Activation act, double x) {
  return act == Activation::kReLU ? std::max(0.0, x) : std::tanh(x);
}

// Derivative expressed through the post-activation value, which is what the
// cache stores.
double activate_grad_from_output(Activation act, double post) {
  return act == Activation::kReLU ? (post > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

void softmax_row(std::vector<double>& row) {
  double peak = row.front();
  for (double v : row) peak = std::max(peak, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : row) v /= total;
}

const char* activation_name(Activation act) {
  return act == Activation::kReLU ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + name);
}

}  // namespace

ClassifierNet ClassifierNet::init(std::vector<int> dims, Activation act, std::uint64_t seed) {
  check_dims(dims);
  ClassifierNet net;
  net.layer_dims = std::move(dims);
  net.activation = act;
  net.rng_seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    const int fan_in = net.layer_dims[l];
    const int fan_out = net.layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(static_cast<std::size_t>(fan_out), std::vector<double>(static_cast<std::size_t>(fan_in)));
    for (auto& row : w) {
      for (double& v : row) v = rng.uniform(-bound, bound);
    }
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
  }
  return net;
}

std::size_t ClassifierNet::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += weights[l].size() * weights[l].front().size() + biases[l].size();
  }
  return count;
}

Matrix forward(const ClassifierNet& net, const Matrix& batch, ForwardCache* cache) {
  const std::size_t layers = net.weights.size();
  if (cache) {
    cache->input = batch;
    cache->hidden.assign(layers - 1, {});
  }
  Matrix current = batch;
  for (auto& row : current) {
    if (static_cast<int>(row.size()) != net.input_dim()) {
      throw std::invalid_argument("forward: input width does not match the net");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    }
  }

  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = net.weights[l];
    const std::vector<double>& b = net.biases[l];
    const std::size_t out_dim = w.size();
    Matrix next(current.size(), std::vector<double>(out_dim));
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto& in = current[i];
      auto& out = next[i];
      for (std::size_t o = 0; o < out_dim; ++o) {
        double z = b[o];
        const auto& w_row = w[o];
        for (std::size_t k = 0; k < in.size(); ++k) z += w_row[k] * in[k];
        out[o] = z;
      }
      if (l + 1 < layers) {
        for (double& v : out) v = activate(net.activation, v);
      } else {
        softmax_row(out);
      }
    }
    if (cache && l + 1 < layers) cache->hidden[l] = next;
    current = std::move(next);
  }
  if (cache) cache->outputs = current;
  return current;
}

std::vector<SimplexVector> forward_simplex(const ClassifierNet& net, const Matrix& batch,
                                           ForwardCache* cache) {
  Matrix rows = forward(net, batch, cache);
  std::vector<SimplexVector> result;
  result.reserve(rows.size());
  for (auto& row : rows) result.push_back(SimplexVector::trusted(std::move(row)));
  return result;
}

NetGradients NetGradients::zeros_like(const ClassifierNet& net) {
  NetGradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].size(),
                           std::vector<double>(net.weights[l].front().size(), 0.0));
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

NetGradients backward(const ClassifierNet& net, const ForwardCache& cache,
                      const Matrix& upstream) {
  const std::size_t layers = net.weights.size();
  if (cache.outputs.empty() || cache.input.empty()) {
    throw std::invalid_argument("backward: forward cache is missing");
  }
  if (upstream.size() != cache.outputs.size()) {
    throw std::invalid_argument("backward: upstream shape does not match the forward batch");
  }

  NetGradients grads = NetGradients::zeros_like(net);
  const std::size_t n = cache.outputs.size();

  // delta starts as dL/dz of the softmax layer:
  //   dz_c = out_c * (g_c - sum_k g_k out_k)
  Matrix delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& out = cache.outputs[i];
    const auto& g = upstream[i];
    if (g.size() != out.size()) {
      throw std::invalid_argument("backward: upstream row width does not match outputs");
    }
    double dot = 0.0;
    for (std::size_t c = 0; c < out.size(); ++c) dot += g[c] * out[c];
    auto& d = delta[i];
    d.resize(out.size());
    for (std::size_t c = 0; c < out.size(); ++c) d[c] = out[c] * (g[c] - dot);
  }

  for (int l = static_cast<int>(layers) - 1; l >= 0; --l) {
    const Matrix& inputs = (l == 0) ? cache.input : cache.hidden[static_cast<std::size_t>(l - 1)];
    auto& gw = grads.weights[static_cast<std::size_t>(l)];
    auto& gb = grads.biases[static_cast<std::size_t>(l)];
    const Matrix& w = net.weights[static_cast<std::size_t>(l)];

    for (std::size_t i = 0; i < n; ++i) {
      const auto& in = inputs[i];
      const auto& d = delta[i];
      for (std::size_t o = 0; o < d.size(); ++o) {
        const double dv = d[o];
        gb[o] += dv;
        auto& gw_row = gw[o];
        for (std::size_t k = 0; k < in.size(); ++k) gw_row[k] += dv * in[k];
      }
    }

    if (l > 0) {
      const Matrix& post = cache.hidden[static_cast<std::size_t>(l - 1)];
      Matrix prev_delta(n, std::vector<double>(w.front().size(), 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& d = delta[i];
        auto& pd = prev_delta[i];
        for (std::size_t o = 0; o < d.size(); ++o) {
          const double dv = d[o];
          if (dv == 0.0) continue;
          const auto& w_row = w[o];
          for (std::size_t k = 0; k < pd.size(); ++k) pd[k] += dv * w_row[k];
        }
        for (std::size_t k = 0; k < pd.size(); ++k) {
          pd[k] *= activate_grad_from_output(net.activation, post[i][k]);
        }
      }
      delta = std::move(prev_delta);
    }
  }
  return grads;
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.kind = Kind::kSgd;
  s.learning_rate = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr) {
  OptimizerState s;
  s.kind = Kind::kAdam;
  s.learning_rate = lr;
  return s;
}

void step(ClassifierNet& net, const NetGradients& grads, OptimizerState& state) {
  if (!(state.learning_rate >= 0.0)) {
    throw std::invalid_argument("step: learning rate must be >= 0");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (const auto& row : grads.weights[l]) {
      for (double v : row) {
        if (!std::isfinite(v)) throw std::invalid_argument("step: non-finite gradient");
      }
    }
    for (double v : grads.biases[l]) {
      if (!std::isfinite(v)) throw std::invalid_argument("step: non-finite gradient");
    }
  }

  if (state.kind == OptimizerState::Kind::kSgd) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (std::size_t o = 0; o < net.weights[l].size(); ++o) {
        for (std::size_t k = 0; k < net.weights[l][o].size(); ++k) {
          net.weights[l][o][k] -= state.learning_rate * grads.weights[l][o][k];
        }
      }
      for (std::size_t o = 0; o < net.biases[l].size(); ++o) {
        net.biases[l][o] -= state.learning_rate * grads.biases[l][o];
      }
    }
    return;
  }

  if (state.m_weights.empty()) {
    NetGradients zero = NetGradients::zeros_like(net);
    state.m_weights = zero.weights;
    state.v_weights = zero.weights;
    state.m_biases = zero.biases;
    state.v_biases = zero.biases;
  }
  ++state.step_count;
  const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step_count));

  const auto adam_update = [&](double& theta, double g, double& m, double& v) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    theta -= state.learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
  };

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t o = 0; o < net.weights[l].size(); ++o) {
      for (std::size_t k = 0; k < net.weights[l][o].size(); ++k) {
        adam_update(net.weights[l][o][k], grads.weights[l][o][k], state.m_weights[l][o][k],
                    state.v_weights[l][o][k]);
      }
    }
    for (std::size_t o = 0; o < net.biases[l].size(); ++o) {
      adam_update(net.biases[l][o], grads.biases[l][o], state.m_biases[l][o],
                  state.v_biases[l][o]);
    }
  }
}

namespace {

nlohmann::json matrices_to_json(const std::vector<Matrix>& ms) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : ms) out.push_back(m);
  return out;
}

std::vector<Matrix> matrices_from_json(const nlohmann::json& j) {
  std::vector<Matrix> out;
  for (const auto& m : j) out.push_back(m.get<Matrix>());
  return out;
}

}  // namespace

std::string checkpoint_to_json(const ClassifierNet& net, const OptimizerState* opt) {
  nlohmann::json j;
  j["layer_dims"] = net.layer_dims;
  j["activation"] = activation_name(net.activation);
  j["rng_seed"] = net.rng_seed;
  j["weights"] = matrices_to_json(net.weights);
  j["biases"] = net.biases;
  if (opt) {
    nlohmann::json o;
    o["kind"] = opt->kind == OptimizerState::Kind::kSgd ? "sgd" : "adam";
    o["learning_rate"] = opt->learning_rate;
    o["step_count"] = opt->step_count;
    if (!opt->m_weights.empty()) {
      o["m_weights"] = matrices_to_json(opt->m_weights);
      o["v_weights"] = matrices_to_json(opt->v_weights);
      o["m_biases"] = opt->m_biases;
      o["v_biases"] = opt->v_biases;
    }
    j["optimizer"] = std::move(o);
  }
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Checkpoint ckpt;
  ckpt.net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  check_dims(ckpt.net.layer_dims);
  ckpt.net.activation = activation_from_name(j.at("activation").get<std::string>());
  ckpt.net.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  ckpt.net.weights = matrices_from_json(j.at("weights"));
  ckpt.net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    ckpt.has_optimizer = true;
    ckpt.optimizer.kind = o.at("kind").get<std::string>() == "sgd" ? OptimizerState::Kind::kSgd
                                                                   : OptimizerState::Kind::kAdam;
    ckpt.optimizer.learning_rate = o.at("learning_rate").get<double>();
    ckpt.optimizer.step_count = o.at("step_count").get<long>();
    if (o.contains("m_weights")) {
      ckpt.optimizer.m_weights = matrices_from_json(o.at("m_weights"));
      ckpt.optimizer.v_weights = matrices_from_json(o.at("v_weights"));
      ckpt.optimizer.m_biases = o.at("m_biases").get<std::vector<std::vector<double>>>();
      ckpt.optimizer.v_biases = o.at("v_biases").get<std::vector<std::vector<double>>>();
    }
  }
  return ckpt;
}

}  // namespace tcgm
