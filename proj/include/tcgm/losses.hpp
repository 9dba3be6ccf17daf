// The total-correlation-gain loss family with analytic gradients with
// respect to the classifier outputs.
//
// For a batch {x_i} and prior p, the batch gain is
//
//   1 + (1/N) sum_i log sum_c prod_m h^m(x^m_i)_c / p_c^(M-1)
//     - avg over index tuples (i_1 != ... != i_M) of
//           sum_c prod_m h^m(x^m_{i_m})_c / p_c^(M-1)
//
// The agreement term rewards the classifiers for agreeing on matched
// samples; the penalty term charges them for agreeing across mismatched
// samples, which blocks the constant-classifier solution. The penalty
// average runs over all N!/(N-M)! ordered distinct tuples or over a sampled
// subset, per the plan.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcgm/joint_table.hpp"
#include "tcgm/simplex.hpp"

namespace tcgm {

// Classifier probabilities are clamped to at least this before any log.
inline constexpr double kProbFloor = 1e-12;

// Per-modality batch outputs: per_modality[m][i] = h^m(x^m_i).
struct ClassifierBatchOutputs {
  std::vector<std::vector<SimplexVector>> per_modality;

  int modality_count() const { return static_cast<int>(per_modality.size()); }
  int batch_size() const {
    return per_modality.empty() ? 0 : static_cast<int>(per_modality.front().size());
  }
  int class_count() const;
  void validate() const;
};

struct PenaltySamplingPlan {
  enum class Mode { kFullEnumeration, kSampled };

  Mode mode = Mode::kFullEnumeration;
  int sample_count = 0;        // Sampled mode: tuples drawn per batch, >= 1
  std::uint64_t rng_seed = 0;  // Sampled mode

  static PenaltySamplingPlan full_enumeration() { return {Mode::kFullEnumeration, 0, 0}; }
  static PenaltySamplingPlan sampled(int count, std::uint64_t seed) {
    return {Mode::kSampled, count, seed};
  }
};

struct LossDiagnostics {
  long clamp_events = 0;        // probabilities that hit kProbFloor
  long penalty_tuples = 0;      // tuples enumerated or drawn
  double penalty_mean = 0.0;    // mean of the per-tuple penalty summand
  double penalty_variance = 0.0;

  std::string to_json() const;
};

struct LossValueWithGrad {
  double value = 0.0;
  // grads[m][i][c] = d value / d per_modality[m][i][c]
  std::vector<std::vector<std::vector<double>>> grads;
  LossDiagnostics diagnostics;
};

// Normalize((prod_m h^m_c / p_c^(M-1))_c), evaluated in log domain. Exact
// zeros in the inputs stay exact zeros in the output. Throws when the prior
// has a zero entry or every class has zero product.
SimplexVector aggregator(const std::vector<SimplexVector>& per_modality_posteriors,
                         const SimplexVector& prior);

// 1 + log sum_c prod_m h^m_c / p_c^(M-1): the per-point agreement reward.
// Inputs are floored at kProbFloor, which also bounds the value from below.
double reward_star(const std::vector<SimplexVector>& per_modality_posteriors,
                   const SimplexVector& prior);

// Batch total correlation gain and its gradient. Requirements: prior strictly
// positive; FullEnumeration needs batch >= M and N!/(N-M)! <= 10^6; Sampled
// needs batch >= 2 and sample_count >= 1. Sampled draws index tuples without
// replacement; when the batch is smaller than M (where no distinct tuple
// exists) it falls back to independent draws, documented here as the defined
// behavior for that degenerate case.
LossValueWithGrad tcg_batch(const ClassifierBatchOutputs& outputs, const SimplexVector& prior,
                            const PenaltySamplingPlan& plan);

// (1/N) sum_i -log h(x_i)_{y_i} with gradient. Zero probabilities at the
// label are floored and counted in the diagnostics.
LossValueWithGrad cross_entropy(const std::vector<SimplexVector>& outputs,
                                const std::vector<int>& labels);

// Exact expectation of the batch gain under the table:
//   1 + E_joint[log sum_c ...] - E_marginal-product[sum_c ...],
// enumerated over the full support. classifiers[m][s] is the class posterior
// the m-th classifier assigns at modality state s. With the table's own
// Bayes posteriors and true prior this attains total_correlation(table);
// any other argument stays at or below that value.
double expected_tcg(const JointTable& table,
                    const std::vector<std::vector<SimplexVector>>& classifiers,
                    const SimplexVector& prior);

// The table's exact per-modality Bayes posteriors, shaped for expected_tcg.
std::vector<std::vector<SimplexVector>> bayes_posterior_maps(const JointTable& table);

}  // namespace tcgm
