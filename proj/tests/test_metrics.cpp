#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tcgm/metrics.hpp"
#include "tcgm/rng.hpp"

using namespace tcgm;

namespace {

// O(n^2) pairwise-comparison AUC: probability a random positive outranks a
// random negative, ties counting half.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

long alignment_score(const std::vector<int>& predictions, const std::vector<int>& labels,
                     const std::vector<int>& perm) {
  long matched = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (perm[static_cast<std::size_t>(predictions[i])] == labels[i]) ++matched;
  }
  return matched;
}

}  // namespace

TEST_CASE("alignment permutation") {
  SUBCASE("identity when predictions equal labels") {
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    const auto perm = align_permutation(labels, labels, 3);
    CHECK(perm == std::vector<int>{0, 1, 2});
  }

  SUBCASE("a swap is recovered") {
    const std::vector<int> labels{0, 1, 0, 1, 1};
    std::vector<int> swapped;
    for (int y : labels) swapped.push_back(1 - y);
    const auto perm = align_permutation(swapped, labels, 2);
    CHECK(perm == std::vector<int>{1, 0});
  }

  SUBCASE("brute force and assignment agree on random confusions") {
    Rng rng(13579);
    for (int classes = 2; classes <= 6; ++classes) {
      for (int t = 0; t < 20; ++t) {
        std::vector<int> predictions, labels;
        for (int i = 0; i < 60; ++i) {
          predictions.push_back(rng.index(classes));
          labels.push_back(rng.index(classes));
        }
        const auto brute = align_permutation_brute(predictions, labels, classes);
        const auto hungarian = align_permutation_hungarian(predictions, labels, classes);
        // Optimal score must match even if several permutations tie.
        CHECK(alignment_score(predictions, labels, brute) ==
              alignment_score(predictions, labels, hungarian));
      }
    }
  }

  SUBCASE("large class counts use the assignment path") {
    Rng rng(8642);
    std::vector<int> predictions, labels;
    const int classes = 12;
    for (int i = 0; i < 400; ++i) {
      const int y = rng.index(classes);
      labels.push_back(y);
      predictions.push_back((y + 5) % classes);  // a fixed rotation
    }
    const auto perm = align_permutation(predictions, labels, classes);
    for (int k = 0; k < classes; ++k) {
      CHECK(perm[static_cast<std::size_t>((k + 5) % classes)] == (k + 5 + classes - 5) % classes);
    }
    CHECK(alignment_score(predictions, labels, perm) == 400);
  }

  SUBCASE("empty inputs are rejected") {
    CHECK_THROWS_AS((void)align_permutation({}, {}, 2), std::invalid_argument);
  }
}

TEST_CASE("accuracy and aligned accuracy") {
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const std::vector<int> rotated{1, 1, 2, 2, 0, 0};
  CHECK(accuracy(rotated, labels) == doctest::Approx(0.0));
  CHECK(aligned_accuracy(rotated, labels, 3) == doctest::Approx(1.0));
  CHECK(accuracy(labels, labels) == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)accuracy({0}, {0, 1}), std::invalid_argument);
}

TEST_CASE("rank-statistic AUC") {
  SUBCASE("perfect separation gives one") {
    const std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    CHECK(*auc_score(scores, labels) == doctest::Approx(1.0));
  }

  SUBCASE("constant scores give one half by tie averaging") {
    const std::vector<double> scores(10, 0.5);
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) labels.push_back(i % 2);
    CHECK(*auc_score(scores, labels) == doctest::Approx(0.5));
  }

  SUBCASE("single-class label vectors have no AUC") {
    CHECK_FALSE(auc_score({0.1, 0.4}, {1, 1}).has_value());
    CHECK_FALSE(auc_score({0.1, 0.4}, {0, 0}).has_value());
  }

  SUBCASE("matches the pairwise oracle, ties included") {
    Rng rng(777);
    for (int t = 0; t < 25; ++t) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (int i = 0; i < 80; ++i) {
        // Coarse quantization forces plenty of ties.
        scores.push_back(std::round(rng.uniform() * 8.0) / 8.0);
        labels.push_back(rng.index(2));
      }
      if (std::count(labels.begin(), labels.end(), 1) == 0 ||
          std::count(labels.begin(), labels.end(), 0) == 0) {
        continue;
      }
      const auto fast = auc_score(scores, labels);
      REQUIRE(fast.has_value());
      CHECK(std::abs(*fast - pairwise_auc(scores, labels)) <= 1e-12);
    }
  }
}

TEST_CASE("combined metrics") {
  const std::vector<int> predictions{1, 0, 1, 0};
  const std::vector<double> scores{0.8, 0.3, 0.7, 0.4};
  const std::vector<int> labels{1, 0, 1, 1};
  const auto m = compute_metrics(predictions, scores, labels, 2);
  CHECK(m.accuracy == doctest::Approx(0.75));
  REQUIRE(m.auc.has_value());

  // AUC is only defined for the binary case.
  const auto m3 = compute_metrics({0, 1, 2}, {0.1, 0.2, 0.3}, {0, 1, 2}, 3);
  CHECK_FALSE(m3.auc.has_value());
}
