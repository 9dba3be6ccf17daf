#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "tcgm/info_measures.hpp"
#include "tcgm/joint_table.hpp"
#include "tcgm/rng.hpp"

using namespace tcgm;

namespace {

// Independent nested-loop summation over dropped axes; the oracle the
// library marginal is checked against.
std::vector<double> brute_marginal(const JointTable& table, const std::vector<int>& keep) {
  const auto& supports = table.modality_supports();
  std::vector<int> out_supports;
  for (int axis : keep) out_supports.push_back(supports[static_cast<std::size_t>(axis)]);
  std::size_t out_cells = 1;
  for (int s : out_supports) out_cells *= static_cast<std::size_t>(s);
  std::vector<double> out(out_cells, 0.0);

  std::vector<int> states(supports.size(), 0);
  do {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      idx = idx * static_cast<std::size_t>(out_supports[k]) +
            static_cast<std::size_t>(states[static_cast<std::size_t>(keep[k])]);
    }
    for (int y = 0; y < table.class_count(); ++y) {
      out[idx] += table.at(states, y);
    }
  } while (JointTable::next_state(states, supports));
  return out;
}

// M exact copies of a uniform binary variable, trivial class axis.
JointTable perfect_binary_copies(int m) {
  std::vector<int> supports(static_cast<std::size_t>(m), 2);
  std::size_t cells = 1;
  for (int i = 0; i < m; ++i) cells *= 2;
  std::vector<double> probs(cells, 0.0);
  probs.front() = 0.5;  // all zeros
  probs.back() = 0.5;   // all ones
  return JointTable(supports, 1, std::move(probs));
}

JointTable product_table(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> probs;
  for (double a : p) {
    for (double b : q) probs.push_back(a * b);
  }
  return JointTable({static_cast<int>(p.size()), static_cast<int>(q.size())}, 1,
                    std::move(probs));
}

}  // namespace

TEST_CASE("marginal: uniform cube and product factors") {
  const JointTable cube({2, 2, 2}, 1, std::vector<double>(8, 0.125));
  const auto only_first = cube.marginal({0}, false);
  CHECK(only_first.modality_count() == 1);
  CHECK(only_first.probs()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(only_first.probs()[1] == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> p{0.3, 0.7};
  const std::vector<double> q{0.2, 0.5, 0.3};
  const auto table = product_table(p, q);
  const auto first = table.marginal({0}, false);
  CHECK(std::abs(first.probs()[0] - 0.3) <= 1e-15);
  CHECK(std::abs(first.probs()[1] - 0.7) <= 1e-15);
}

TEST_CASE("marginal matches the nested-loop oracle bitwise") {
  const auto table = JointTable::random({3, 3, 2}, 2, 20240311);
  const std::vector<int> keep{0, 1};
  const auto lib = table.marginal(keep, false);
  const auto oracle = brute_marginal(table, keep);
  REQUIRE(lib.probs().size() == oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(lib.probs()[i] == oracle[i]);  // same summation order: exact
  }
  double total = 0.0;
  for (double v : lib.probs()) total += v;
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("marginal is order-independent across axis drops") {
  const auto table = JointTable::random({3, 2, 4}, 3, 99);
  const auto direct = table.marginal({2}, true);
  const auto step_a = table.marginal({0, 2}, true).marginal({1}, true);
  const auto step_b = table.marginal({1, 2}, true).marginal({1}, true);
  REQUIRE(direct.probs().size() == step_a.probs().size());
  for (std::size_t i = 0; i < direct.probs().size(); ++i) {
    CHECK(std::abs(direct.probs()[i] - step_a.probs()[i]) <= 1e-14);
    CHECK(std::abs(step_a.probs()[i] - step_b.probs()[i]) <= 1e-14);
  }
}

TEST_CASE("marginal rejects empty and out-of-range axis sets") {
  const auto table = JointTable::random({2, 2}, 2, 5);
  CHECK_THROWS_AS((void)table.marginal({}, true), std::invalid_argument);
  CHECK_THROWS_AS((void)table.marginal({2}, false), std::out_of_range);
  CHECK_THROWS_AS((void)table.marginal({1, 0}, false), std::invalid_argument);
}

TEST_CASE("table constructor validates mass and shape") {
  CHECK_THROWS_AS(JointTable({2}, 1, {0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(JointTable({2}, 1, {1.2, -0.2}), std::invalid_argument);
  CHECK_THROWS_AS(JointTable({}, 1, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(JointTable({2}, 1, {1.0}), std::invalid_argument);
}

TEST_CASE("total correlation: independence, perfect copies, dual routes") {
  const auto independent = product_table({0.3, 0.7}, {0.2, 0.5, 0.3});
  CHECK(std::abs(total_correlation(independent)) <= 1e-12);
  CHECK(std::abs(total_correlation_kl(independent)) <= 1e-12);

  for (int m = 2; m <= 4; ++m) {
    const auto copies = perfect_binary_copies(m);
    const double expected = (m - 1) * std::log(2.0);
    CHECK(std::abs(total_correlation(copies) - expected) <= 1e-12);
    CHECK(std::abs(total_correlation_kl(copies) - expected) <= 1e-12);
  }

  for (int t = 0; t < 20; ++t) {
    const auto table = JointTable::random({3, 2, 3}, 2, 1000 + static_cast<std::uint64_t>(t));
    const double entropy_form = total_correlation(table);
    const double kl_form = total_correlation_kl(table);
    CHECK(std::abs(entropy_form - kl_form) <= 1e-10);
    CHECK(entropy_form >= -1e-12);
  }
}

TEST_CASE("conditional total correlation") {
  SUBCASE("factored tables have zero conditional dependence") {
    for (int t = 0; t < 10; ++t) {
      const auto table =
          JointTable::random_conditionally_independent({3, 2, 3}, 3, 7000 + static_cast<std::uint64_t>(t));
      CHECK(std::abs(conditional_total_correlation(table)) <= 1e-10);
    }
  }

  SUBCASE("conditioning on an independent label leaves the dependence") {
    // X-joint: two perfect binary copies; Y independent with prior (0.4, 0.6).
    const std::vector<double> prior{0.4, 0.6};
    std::vector<double> probs;
    const auto copies = perfect_binary_copies(2);
    for (double px : copies.probs()) {
      for (double py : prior) probs.push_back(px * py);
    }
    const JointTable table({2, 2}, 2, std::move(probs));
    CHECK(std::abs(conditional_total_correlation(table) - total_correlation(table)) <= 1e-12);
    CHECK(std::abs(total_correlation(table) - std::log(2.0)) <= 1e-12);
  }

  SUBCASE("matches the per-class-slice oracle") {
    const auto table = JointTable::random({3, 3, 2}, 3, 42424242);
    const SimplexVector prior = table.class_prior();
    double oracle = 0.0;
    for (int y = 0; y < table.class_count(); ++y) {
      // Conditional slice at Y = y, renormalized to a trivial-class table.
      std::vector<double> slice;
      const std::size_t classes = static_cast<std::size_t>(table.class_count());
      for (std::size_t flat = static_cast<std::size_t>(y); flat < table.probs().size();
           flat += classes) {
        slice.push_back(table.probs()[flat] / prior[y]);
      }
      double mass = 0.0;
      for (double v : slice) mass += v;
      for (double& v : slice) v /= mass;
      const JointTable conditional(table.modality_supports(), 1, std::move(slice));
      oracle += prior[y] * total_correlation(conditional);
    }
    CHECK(std::abs(conditional_total_correlation(table) - oracle) <= 1e-10);
  }
}

TEST_CASE("pointwise log-ratio") {
  const auto independent = product_table({0.3, 0.7}, {0.2, 0.8});
  CHECK(std::abs(pointwise_tc(independent, {0, 1})) <= 1e-12);

  const auto copies = perfect_binary_copies(2);
  CHECK(std::abs(pointwise_tc(copies, {0, 0}) - std::log(2.0)) <= 1e-12);
  // Off-diagonal: joint zero, marginals positive.
  CHECK(pointwise_tc(copies, {0, 1}) == -std::numeric_limits<double>::infinity());
  CHECK(joint_marginal_ratio(copies, {0, 1}) == 0.0);

  SUBCASE("matches direct lookup on a random table") {
    const auto table = JointTable::random({3, 2, 2}, 2, 31337);
    const auto joint = table.drop_label();
    std::vector<int> states(3, 0);
    std::size_t flat = 0;
    do {
      double marginals = 1.0;
      for (int m = 0; m < 3; ++m) {
        marginals *= table.modality_marginal(m)[static_cast<std::size_t>(states[static_cast<std::size_t>(m)])];
      }
      const double expected = std::log(joint.probs()[flat++] / marginals);
      CHECK(std::abs(pointwise_tc(table, states) - expected) <= 1e-12);
    } while (JointTable::next_state(states, table.modality_supports()));
  }

  SUBCASE("zero marginal is an undefined point") {
    // State 1 of the second modality has no mass anywhere.
    const JointTable table({2, 2}, 1, {0.5, 0.0, 0.5, 0.0});
    CHECK_THROWS_AS((void)pointwise_tc(table, {0, 1}), std::domain_error);
  }

  SUBCASE("expectation under the joint recovers the total correlation") {
    const auto table = JointTable::random({3, 3}, 2, 808);
    const auto joint = table.drop_label();
    double expectation = 0.0;
    std::vector<int> states(2, 0);
    std::size_t flat = 0;
    do {
      const double p = joint.probs()[flat++];
      if (p > 0.0) expectation += p * pointwise_tc(table, states);
    } while (JointTable::next_state(states, table.modality_supports()));
    CHECK(std::abs(expectation - total_correlation(table)) <= 1e-10);
  }
}

TEST_CASE("posterior form of the joint-marginal ratio") {
  SUBCASE("agrees with the direct ratio on factored tables") {
    for (int t = 0; t < 10; ++t) {
      const auto table =
          JointTable::random_conditionally_independent({2, 3}, 2, 555 + static_cast<std::uint64_t>(t));
      std::vector<int> states(2, 0);
      do {
        const auto r = ratio_via_posteriors(table, states);
        CHECK(r.assumption_verified);
        CHECK(std::abs(r.value - joint_marginal_ratio(table, states)) <= 1e-10);
      } while (JointTable::next_state(states, table.modality_supports()));
    }
  }

  SUBCASE("trivial label: the ratio is one everywhere") {
    const auto table = JointTable::random_conditionally_independent({2, 2, 2}, 1, 9);
    std::vector<int> states(3, 0);
    do {
      const auto r = ratio_via_posteriors(table, states);
      CHECK(std::abs(r.value - 1.0) <= 1e-12);
    } while (JointTable::next_state(states, table.modality_supports()));
  }

  SUBCASE("single modality: the ratio is one") {
    const auto table = JointTable::random({4}, 3, 77);
    for (int s = 0; s < 4; ++s) {
      const auto r = ratio_via_posteriors(table, {s});
      CHECK(std::abs(r.value - 1.0) <= 1e-12);
    }
  }

  SUBCASE("dependent tables are flagged, not failed") {
    const auto copies = perfect_binary_copies(2);
    // Attach a label that explains nothing.
    std::vector<double> probs;
    for (double px : copies.probs()) {
      probs.push_back(px * 0.5);
      probs.push_back(px * 0.5);
    }
    const JointTable table({2, 2}, 2, std::move(probs));
    const auto r = ratio_via_posteriors(table, {0, 0});
    CHECK_FALSE(r.assumption_verified);
    CHECK(r.ctc > 0.5);
  }
}

TEST_CASE("dual bound") {
  const auto table = JointTable::random({3, 2, 2}, 2, 123321);
  const double tc = total_correlation(table);

  SUBCASE("constant critic gives zero") {
    const double value = dual_bound_value(table, [](const std::vector<int>&) { return 1.0; });
    CHECK(std::abs(value) <= 1e-12);
  }

  SUBCASE("canonical critic attains the total correlation") {
    const double value = dual_bound_value(
        table, [&table](const std::vector<int>& x) { return 1.0 + pointwise_tc(table, x); });
    CHECK(std::abs(value - tc) <= 1e-9);
  }

  SUBCASE("100 random bounded critics stay below") {
    Rng rng(2718);
    for (int k = 0; k < 100; ++k) {
      const double a = rng.uniform(-2.0, 2.0);
      const double b = rng.uniform(-1.0, 1.0);
      const auto g = [a, b](const std::vector<int>& x) {
        double v = a;
        for (std::size_t m = 0; m < x.size(); ++m) {
          v += b * std::cos(static_cast<double>((m + 2) * (x[m] + 1)));
        }
        return v;
      };
      CHECK(dual_bound_value(table, g) <= tc + 1e-9);
    }
  }

  SUBCASE("non-finite critics are rejected") {
    CHECK_THROWS_AS((void)dual_bound_value(table,
                                           [](const std::vector<int>&) {
                                             return std::numeric_limits<double>::infinity();
                                           }),
                    std::domain_error);
  }
}

TEST_CASE("generalized dual bounds over the divergence family") {
  const auto table = JointTable::random({3, 3}, 2, 464646);

  SUBCASE("optimal critic recovers each divergence") {
    for (const auto kind :
         {FDivergenceKind::kKL, FDivergenceKind::kReverseKL, FDivergenceKind::kPearsonChi2}) {
      const auto g = [&](const std::vector<int>& x) {
        return f_prime(kind, joint_marginal_ratio(table, x));
      };
      CHECK(std::abs(f_dual_bound(table, kind, g) - f_divergence(table, kind)) <= 1e-9);
    }
  }

  SUBCASE("the KL instance matches the plain dual bound") {
    const auto g = [&](const std::vector<int>& x) {
      return 1.0 + pointwise_tc(table, x);
    };
    CHECK(std::abs(f_dual_bound(table, FDivergenceKind::kKL, g) -
                   total_correlation(table)) <= 1e-9);
  }

  SUBCASE("independent table: optimal chi-squared critic gives zero") {
    const auto independent = product_table({0.4, 0.6}, {0.1, 0.9});
    const auto g = [&](const std::vector<int>& x) {
      return f_prime(FDivergenceKind::kPearsonChi2, joint_marginal_ratio(independent, x));
    };
    CHECK(std::abs(f_dual_bound(independent, FDivergenceKind::kPearsonChi2, g)) <= 1e-12);
    CHECK(std::abs(f_divergence(independent, FDivergenceKind::kPearsonChi2)) <= 1e-12);
  }

  SUBCASE("reverse KL matches the direct summation oracle") {
    const auto joint = table.drop_label();
    double oracle = 0.0;
    std::vector<int> states(2, 0);
    std::size_t flat = 0;
    do {
      double q = 1.0;
      for (int m = 0; m < 2; ++m) {
        q *= table.modality_marginal(m)[static_cast<std::size_t>(states[static_cast<std::size_t>(m)])];
      }
      const double p = joint.probs()[flat++];
      oracle += q * (-std::log(p / q));
    } while (JointTable::next_state(states, table.modality_supports()));
    CHECK(std::abs(f_divergence(table, FDivergenceKind::kReverseKL) - oracle) <= 1e-10);
  }

  SUBCASE("random critics stay below each divergence") {
    Rng rng(5150);
    for (int k = 0; k < 50; ++k) {
      const double a = rng.uniform(-1.5, -0.1);  // keep reverse-KL critics in-domain
      const double b = rng.uniform(-0.3, 0.3);
      const auto g = [a, b](const std::vector<int>& x) {
        double v = a;
        for (int s : x) v += b * std::sin(static_cast<double>(s + 1));
        return v;
      };
      for (const auto kind :
           {FDivergenceKind::kKL, FDivergenceKind::kReverseKL, FDivergenceKind::kPearsonChi2}) {
        CHECK(f_dual_bound(table, kind, g) <= f_divergence(table, kind) + 1e-9);
      }
    }
  }
}

TEST_CASE("serialization round-trips and loader tolerances") {
  const auto table = JointTable::random({3, 2}, 2, 112233);
  const auto restored = JointTable::from_json(table.to_json());
  REQUIRE(restored.probs().size() == table.probs().size());
  for (std::size_t i = 0; i < table.probs().size(); ++i) {
    CHECK(restored.probs()[i] == table.probs()[i]);
  }

  SUBCASE("decimal strings are accepted") {
    const auto parsed = JointTable::from_json(
        R"({"modality_supports":[2],"class_count":1,"probs":["0.25","0.75"]})");
    CHECK(parsed.probs()[0] == doctest::Approx(0.25));
  }

  SUBCASE("slightly off mass renormalizes; badly off mass errors") {
    const auto parsed = JointTable::from_json(
        R"({"modality_supports":[2],"class_count":1,"probs":[0.2500000001, 0.75]})");
    double total = 0.0;
    for (double v : parsed.probs()) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-15);
    CHECK_THROWS_AS((void)JointTable::from_json(
                        R"({"modality_supports":[2],"class_count":1,"probs":[0.3,0.75]})"),
                    std::invalid_argument);
  }
}

TEST_CASE("factored construction is exactly conditionally independent") {
  const SimplexVector prior(std::vector<double>{0.25, 0.75});
  const std::vector<std::vector<std::vector<double>>> conditionals{
      {{0.9, 0.1}, {0.2, 0.8}},
      {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}},
  };
  const auto table = JointTable::from_factors(prior, conditionals);
  CHECK(table.modality_count() == 2);
  CHECK(table.class_count() == 2);
  CHECK(std::abs(conditional_total_correlation(table)) <= 1e-12);
  CHECK(std::abs(table.at({0, 1}, 1) - 0.75 * 0.2 * 0.2) <= 1e-12);

  const auto prior_back = table.class_prior();
  CHECK(std::abs(prior_back[0] - 0.25) <= 1e-12);
}
