// Exact joint probability tables over small discrete supports. These tables
// are the ground-truth substrate that every estimator and loss in the
// library is checked against, so all operations are exact enumerations.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tcgm/simplex.hpp"

namespace tcgm {

// Dense distribution over (X^1, ..., X^M, Y), stored row-major with the
// class axis last. Entries are nonnegative and sum to one within 1e-12.
// A table with class_count == 1 is a pure modality joint: the trivial class
// axis carries no information and costs no storage. Instances are immutable
// after construction and safe to share across threads.
class JointTable {
 public:
  // Total cells capped at 10^7; this is an oracle substrate, not an estimator.
  static constexpr std::size_t kMaxCells = 10'000'000;

  JointTable(std::vector<int> modality_supports, int class_count, std::vector<double> probs);

  // Builds P(y) * prod_m P(x^m | y). conditionals[m] has class_count rows of
  // support_m entries, each row a distribution. The result is conditionally
  // independent given Y by construction, exactly.
  static JointTable from_factors(const SimplexVector& prior,
                                 const std::vector<std::vector<std::vector<double>>>& conditionals);

  // Cells i.i.d. Uniform(floor, 1), normalized. floor > 0 keeps every
  // marginal strictly positive.
  static JointTable random(const std::vector<int>& supports, int class_count,
                           std::uint64_t seed, double floor = 0.05);

  // Random prior and random per-class conditionals fed through from_factors.
  static JointTable random_conditionally_independent(const std::vector<int>& supports,
                                                     int class_count, std::uint64_t seed,
                                                     double floor = 0.05);

  int modality_count() const { return static_cast<int>(supports_.size()); }
  const std::vector<int>& modality_supports() const { return supports_; }
  int class_count() const { return class_count_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t cell_count() const { return probs_.size(); }

  double at(const std::vector<int>& states, int label) const;
  std::size_t flat_index(const std::vector<int>& states, int label) const;

  // Marginal keeping the listed modality axes (0-based, strictly increasing)
  // and, iff keep_label, the class axis. At least one modality must be kept.
  // Summation walks the input row-major, so the result is bit-identical to a
  // nested-loop summation in the same order.
  JointTable marginal(const std::vector<int>& keep_modalities, bool keep_label) const;

  // Marginalize the class axis away (result has a trivial class axis).
  JointTable drop_label() const;

  // Reinterpret Y as an (M+1)-th modality so that measures over the modality
  // axes include it as an ordinary variable.
  JointTable label_as_modality() const;

  SimplexVector class_prior() const;

  // P(X^m = s) for every state s of modality m.
  std::vector<double> modality_marginal(int m) const;

  // P(X^1 = s1, ..., X^M = sM) marginalized over Y, flat row-major over the
  // modality axes only.
  std::vector<double> modality_joint() const;

  // P(Y | X^m = s) for every state s; throws if some state has zero mass.
  std::vector<SimplexVector> modality_posteriors(int m) const;

  // P(Y | X^[M] = states); throws if the point has zero mass.
  SimplexVector joint_posterior(const std::vector<int>& states) const;

  // Serialization: {"modality_supports": [...], "class_count": n,
  // "probs": [...]} with probs row-major, modality axes then the class axis.
  // The loader accepts numbers or decimal strings and renormalizes when the
  // total is within 1e-9 of one; anything further off is an error.
  std::string to_json() const;
  static JointTable from_json(const std::string& text);

  // Iteration helper: advances a mixed-radix state vector over the modality
  // axes; returns false after the last state.
  static bool next_state(std::vector<int>& states, const std::vector<int>& supports);

 private:
  JointTable() = default;
  void compute_strides();

  std::vector<int> supports_;
  int class_count_ = 1;
  std::vector<double> probs_;
  std::vector<std::size_t> strides_;  // per modality axis; class axis stride is 1
};

}  // namespace tcgm
