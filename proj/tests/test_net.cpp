#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "tcgm/grad_check.hpp"
#include "tcgm/losses.hpp"
#include "tcgm/net.hpp"
#include "tcgm/rng.hpp"

using namespace tcgm;

namespace {

Matrix random_batch(Rng& rng, int n, int dim, double scale = 1.0) {
  Matrix batch(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& row : batch) {
    for (double& v : row) v = scale * rng.normal();
  }
  return batch;
}

}  // namespace

TEST_CASE("forward basics") {
  SUBCASE("zero-initialized net outputs the uniform distribution") {
    auto net = ClassifierNet::init({3, 4}, Activation::kReLU, 1);
    for (auto& row : net.weights[0]) {
      for (double& v : row) v = 0.0;
    }
    Rng rng(2);
    const auto out = forward(net, random_batch(rng, 5, 3));
    for (const auto& row : out) {
      for (double v : row) CHECK(std::abs(v - 0.25) <= 1e-12);
    }
  }

  SUBCASE("large identity-like single layer saturates toward one-hot") {
    ClassifierNet net;
    net.layer_dims = {3, 3};
    net.activation = Activation::kReLU;
    Matrix w(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 50.0;
    net.weights.push_back(w);
    net.biases.emplace_back(3, 0.0);
    const auto out = forward(net, {{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
    CHECK(out[0][0] > 0.999);
    CHECK(out[1][2] > 0.999);
  }

  SUBCASE("deterministic and bitwise reproducible") {
    const auto net = ClassifierNet::init({4, 8, 3}, Activation::kTanh, 909);
    Rng rng(11);
    const auto batch = random_batch(rng, 6, 4);
    const auto a = forward(net, batch);
    const auto b = forward(net, batch);
    const auto net2 = ClassifierNet::init({4, 8, 3}, Activation::kTanh, 909);
    const auto c = forward(net2, batch);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].size(); ++j) {
        CHECK(a[i][j] == b[i][j]);
        CHECK(a[i][j] == c[i][j]);
      }
    }
  }

  SUBCASE("input validation") {
    const auto net = ClassifierNet::init({3, 2}, Activation::kReLU, 5);
    CHECK_THROWS_AS((void)forward(net, {{1.0, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS((void)forward(net, {{1.0, 2.0, std::nan("")}}), std::invalid_argument);
  }

  SUBCASE("rows are valid simplexes") {
    const auto net = ClassifierNet::init({5, 16, 4}, Activation::kReLU, 31);
    Rng rng(32);
    const auto rows = forward_simplex(net, random_batch(rng, 10, 5, 3.0));
    for (const auto& row : rows) row.validate();
  }
}

TEST_CASE("backward matches finite differences through the losses") {
  SUBCASE("cross entropy through a two-layer net") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto net = ClassifierNet::init({4, 6, 3}, seed % 2 ? Activation::kTanh : Activation::kReLU,
                                     100 + seed);
      Rng rng(200 + seed);
      const auto batch = random_batch(rng, 8, 4);
      std::vector<int> labels;
      for (int i = 0; i < 8; ++i) labels.push_back(rng.index(3));

      ForwardCache cache;
      const auto rows = forward_simplex(net, batch, &cache);
      const auto ce = cross_entropy(rows, labels);
      const auto grads = backward(net, cache, ce.grads[0]);

      const auto loss = [&](const ClassifierNet& candidate) {
        return cross_entropy(forward_simplex(candidate, batch), labels).value;
      };
      const auto check = finite_difference_check(net, loss, grads);
      CHECK(check.pass());
    }
  }

  SUBCASE("batch gain through three nets") {
    const int modalities = 3;
    std::vector<ClassifierNet> nets;
    std::vector<Matrix> batches;
    Rng rng(4000);
    for (int m = 0; m < modalities; ++m) {
      nets.push_back(ClassifierNet::init({3, 5, 2}, Activation::kTanh,
                                         500 + static_cast<std::uint64_t>(m)));
      batches.push_back(random_batch(rng, 6, 3));
    }
    const SimplexVector prior = SimplexVector::uniform(2);
    const auto plan = PenaltySamplingPlan::full_enumeration();

    std::vector<ForwardCache> caches(static_cast<std::size_t>(modalities));
    ClassifierBatchOutputs outputs;
    for (int m = 0; m < modalities; ++m) {
      outputs.per_modality.push_back(forward_simplex(nets[static_cast<std::size_t>(m)],
                                                     batches[static_cast<std::size_t>(m)],
                                                     &caches[static_cast<std::size_t>(m)]));
    }
    const auto gain = tcg_batch(outputs, prior, plan);
    std::vector<NetGradients> grads;
    for (int m = 0; m < modalities; ++m) {
      grads.push_back(backward(nets[static_cast<std::size_t>(m)],
                               caches[static_cast<std::size_t>(m)],
                               gain.grads[static_cast<std::size_t>(m)]));
    }

    const auto loss = [&](const std::vector<ClassifierNet>& candidates) {
      ClassifierBatchOutputs c_outputs;
      for (int m = 0; m < modalities; ++m) {
        c_outputs.per_modality.push_back(forward_simplex(
            candidates[static_cast<std::size_t>(m)], batches[static_cast<std::size_t>(m)]));
      }
      return tcg_batch(c_outputs, prior, plan).value;
    };
    const auto check = finite_difference_check(nets, loss, grads);
    CHECK(check.pass());
  }

  SUBCASE("zero upstream gives zero parameter gradients") {
    const auto net = ClassifierNet::init({3, 4, 2}, Activation::kReLU, 77);
    Rng rng(78);
    const auto batch = random_batch(rng, 4, 3);
    ForwardCache cache;
    forward(net, batch, &cache);
    const Matrix upstream(4, std::vector<double>(2, 0.0));
    const auto grads = backward(net, cache, upstream);
    for (const auto& layer : grads.weights) {
      for (const auto& row : layer) {
        for (double v : row) CHECK(v == 0.0);
      }
    }
    for (const auto& layer : grads.biases) {
      for (double v : layer) CHECK(v == 0.0);
    }
  }

  SUBCASE("missing cache is rejected") {
    const auto net = ClassifierNet::init({3, 2}, Activation::kReLU, 9);
    ForwardCache cache;  // never filled
    CHECK_THROWS_AS((void)backward(net, cache, {{0.0, 0.0}}), std::invalid_argument);
  }
}

TEST_CASE("optimizer steps") {
  SUBCASE("sgd is the plain update") {
    ClassifierNet net;
    net.layer_dims = {1, 1};
    net.weights = {Matrix{{0.0}}};
    net.biases = {{0.0}};
    NetGradients g;
    g.weights = {Matrix{{1.0}}};
    g.biases = {{2.0}};
    auto opt = OptimizerState::sgd(0.01);
    step(net, g, opt);
    CHECK(net.weights[0][0][0] == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(net.biases[0][0] == doctest::Approx(-0.02).epsilon(1e-12));
  }

  SUBCASE("adam first step moves by about the learning rate") {
    ClassifierNet net;
    net.layer_dims = {1, 1};
    net.weights = {Matrix{{0.0}}};
    net.biases = {{0.0}};
    NetGradients g;
    g.weights = {Matrix{{1.0}}};
    g.biases = {{0.0}};
    auto opt = OptimizerState::adam(0.1);
    step(net, g, opt);
    // Bias correction makes m_hat / sqrt(v_hat) equal 1 on the first step,
    // up to the epsilon in the denominator.
    const double expected = -0.1 / (1.0 + kAdamEps);
    CHECK(std::abs(net.weights[0][0][0] - expected) <= 1e-15);
  }

  SUBCASE("zero gradients leave parameters unchanged") {
    auto net = ClassifierNet::init({3, 4, 2}, Activation::kReLU, 55);
    const auto before = net;
    auto g = NetGradients::zeros_like(net);
    auto opt = OptimizerState::adam(0.5);
    step(net, g, opt);
    step(net, g, opt);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (std::size_t o = 0; o < net.weights[l].size(); ++o) {
        for (std::size_t k = 0; k < net.weights[l][o].size(); ++k) {
          CHECK(net.weights[l][o][k] == before.weights[l][o][k]);
        }
      }
    }
    CHECK(opt.step_count == 2);
  }

  SUBCASE("non-finite gradients are rejected") {
    auto net = ClassifierNet::init({2, 2}, Activation::kReLU, 3);
    auto g = NetGradients::zeros_like(net);
    g.weights[0][0][0] = std::numeric_limits<double>::quiet_NaN();
    auto opt = OptimizerState::sgd(0.1);
    CHECK_THROWS_AS(step(net, g, opt), std::invalid_argument);
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  auto net = ClassifierNet::init({4, 8, 3}, Activation::kTanh, 123456);
  auto opt = OptimizerState::adam(0.003);
  Rng rng(7);
  const auto batch = random_batch(rng, 5, 4);
  const std::vector<int> labels{0, 1, 2, 1, 0};
  ForwardCache cache;
  const auto rows = forward_simplex(net, batch, &cache);
  const auto ce = cross_entropy(rows, labels);
  step(net, backward(net, cache, ce.grads[0]), opt);

  const auto restored = checkpoint_from_json(checkpoint_to_json(net, &opt));
  CHECK(restored.net.layer_dims == net.layer_dims);
  CHECK(restored.net.rng_seed == net.rng_seed);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t o = 0; o < net.weights[l].size(); ++o) {
      for (std::size_t k = 0; k < net.weights[l][o].size(); ++k) {
        CHECK(restored.net.weights[l][o][k] == net.weights[l][o][k]);
      }
    }
  }
  REQUIRE(restored.has_optimizer);
  CHECK(restored.optimizer.step_count == opt.step_count);
  CHECK(restored.optimizer.m_weights[0][0][0] == opt.m_weights[0][0][0]);
}
