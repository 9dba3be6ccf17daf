// Scoring utilities: accuracy, rank-statistic AUC, and the class-permutation
// alignment needed because unsupervised maximizers identify labels only up
// to a permutation.

#pragma once

#include <optional>
#include <vector>

namespace tcgm {

// perm[k] = true class assigned to predicted class k, chosen to maximize the
// number of matches. Exhaustive search for class_count <= 10, Hungarian
// assignment above that; the two agree wherever both run.
std::vector<int> align_permutation(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int class_count);
std::vector<int> align_permutation_brute(const std::vector<int>& predictions,
                                         const std::vector<int>& labels, int class_count);
std::vector<int> align_permutation_hungarian(const std::vector<int>& predictions,
                                             const std::vector<int>& labels, int class_count);

// Min-cost assignment on a square matrix; returns col index per row.
std::vector<int> solve_assignment_min(const std::vector<std::vector<double>>& cost);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Matched fraction after the best class permutation (clustering accuracy).
double aligned_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                        int class_count);

// Mann-Whitney AUC with tie-averaged ranks; labels are 0/1 and scores rank
// the positive class. nullopt when either class is absent.
std::optional<double> auc_score(const std::vector<double>& scores,
                                const std::vector<int>& labels);

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> auc;
};

// Accuracy over predictions plus, for binary problems, AUC from the
// positive-class scores.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<double>& scores,
                        const std::vector<int>& labels, int class_count);

}  // namespace tcgm
