#include "tcgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tcgm {

namespace {

std::vector<std::vector<long>> confusion_counts(const std::vector<int>& predictions,
                                                const std::vector<int>& labels,
                                                int class_count) {
  if (predictions.empty()) throw std::invalid_argument("alignment: empty inputs");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("alignment: predictions and labels differ in length");
  }
  std::vector<std::vector<long>> counts(static_cast<std::size_t>(class_count),
                                        std::vector<long>(static_cast<std::size_t>(class_count), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if (p < 0 || p >= class_count || y < 0 || y >= class_count) {
      throw std::out_of_range("alignment: class id out of range");
    }
    ++counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(y)];
  }
  return counts;
}

}  // namespace

std::vector<int> align_permutation_brute(const std::vector<int>& predictions,
                                         const std::vector<int>& labels, int class_count) {
  const auto counts = confusion_counts(predictions, labels, class_count);
  std::vector<int> perm(static_cast<std::size_t>(class_count));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_score = -1;
  do {
    long score = 0;
    for (int k = 0; k < class_count; ++k) {
      score += counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    }
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<int> solve_assignment_min(const std::vector<std::vector<double>>& cost) {
  // Kuhn-Munkres with potentials, O(n^3).
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // row matched to column j
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < min_slack[static_cast<std::size_t>(j)]) {
          min_slack[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (min_slack[static_cast<std::size_t>(j)] < delta) {
          delta = min_slack[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          min_slack[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (match[static_cast<std::size_t>(j)] > 0) {
      assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return assignment;
}

std::vector<int> align_permutation_hungarian(const std::vector<int>& predictions,
                                             const std::vector<int>& labels, int class_count) {
  const auto counts = confusion_counts(predictions, labels, class_count);
  long peak = 0;
  for (const auto& row : counts) {
    for (long c : row) peak = std::max(peak, c);
  }
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(class_count),
                                        std::vector<double>(static_cast<std::size_t>(class_count)));
  for (int i = 0; i < class_count; ++i) {
    for (int j = 0; j < class_count; ++j) {
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(peak - counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  return solve_assignment_min(cost);
}

std::vector<int> align_permutation(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int class_count) {
  if (class_count <= 10) return align_permutation_brute(predictions, labels, class_count);
  return align_permutation_hungarian(predictions, labels, class_count);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty inputs");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: predictions and labels differ in length");
  }
  std::size_t matched = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(predictions.size());
}

double aligned_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                        int class_count) {
  const auto perm = align_permutation(predictions, labels, class_count);
  std::size_t matched = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (perm[static_cast<std::size_t>(predictions[i])] == labels[i]) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(predictions.size());
}

std::optional<double> auc_score(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("auc_score: scores and labels must be nonempty and equal length");
  }
  const std::size_t n = scores.size();
  long positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auc_score: labels must be 0/1");
    positives += y;
  }
  const long negatives = static_cast<long>(n) - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tie-averaged ranks, 1-based.
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1) rank_sum += rank[k];
  }
  const double u = rank_sum - 0.5 * static_cast<double>(positives) *
                                  (static_cast<double>(positives) + 1.0);
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<double>& scores,
                        const std::vector<int>& labels, int class_count) {
  Metrics m;
  m.accuracy = accuracy(predictions, labels);
  if (class_count == 2) m.auc = auc_score(scores, labels);
  return m;
}

}  // namespace tcgm
