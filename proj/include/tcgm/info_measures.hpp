// Information measures on exact joint tables, in nats.
//
// Conventions: 0 log 0 = 0 in every entropy sum. The pointwise log-ratio at
// a point with zero joint mass but positive marginals is -infinity; such
// points carry zero weight under the joint, so expectations ignore them.

#pragma once

#include <functional>
#include <vector>

#include "tcgm/joint_table.hpp"

namespace tcgm {

enum class FDivergenceKind { kKL, kReverseKL, kPearsonChi2 };

// Shannon entropy of an unnormalized-tolerant weight vector (entries >= 0).
double shannon_entropy(const std::vector<double>& dist);

// Amount of information shared by the modality axes:
//   sum_m H(X^m) - H(X^1..X^M),
// the class axis marginalized out first (a no-op for class_count == 1; use
// label_as_modality() to include Y as an ordinary variable). Nonnegative.
double total_correlation(const JointTable& table);

// The same quantity as KL(joint || product of marginals) — an independent
// algebraic route that must agree with total_correlation to 1e-10.
double total_correlation_kl(const JointTable& table);

// sum_m H(X^m | Y) - H(X^1..X^M | Y). Zero exactly when the modalities are
// independent given the class, as from_factors tables are by construction.
double conditional_total_correlation(const JointTable& table);

// log p(x^1..x^M) / prod_m p(x^m) over the modality axes. Returns -infinity
// when the joint mass is zero but every modality marginal is positive;
// throws when some marginal is zero (the point is outside the product
// support and the ratio is undefined).
double pointwise_tc(const JointTable& table, const std::vector<int>& states);

// exp(pointwise_tc): the joint-to-marginal-product ratio.
double joint_marginal_ratio(const JointTable& table, const std::vector<int>& states);

struct PosteriorRatio {
  double value = 0.0;         // sum_c prod_m P(Y=c|x^m) / P(Y=c)^(M-1)
  bool assumption_verified = false;
  double ctc = 0.0;           // the conditional total correlation that was checked
};

// The joint-to-marginal ratio computed through per-modality class posteriors
// and the class prior. Equals joint_marginal_ratio when the modalities are
// conditionally independent given Y; the returned flag reports whether that
// held within ctc_tolerance (a warning signal, not an error).
PosteriorRatio ratio_via_posteriors(const JointTable& table, const std::vector<int>& states,
                                    double ctc_tolerance = 1e-9);

using Critic = std::function<double(const std::vector<int>&)>;

// E_joint[g] - E_marginal-product[exp(g - 1)] by exact enumeration over the
// modality axes. A lower bound on total_correlation for every finite critic;
// tight at g = 1 + pointwise_tc. Throws if g returns a non-finite value on a
// support point.
double dual_bound_value(const JointTable& table, const Critic& g);

// Generalized form: E_joint[g] - E_marginal-product[f*(g)] lower-bounds
// f_divergence(table, kind); tight at g = f'(joint/marginal ratio).
double f_dual_bound(const JointTable& table, FDivergenceKind kind, const Critic& g);

// D_f(joint || product of marginals) by direct summation sum_x q f(p/q).
double f_divergence(const JointTable& table, FDivergenceKind kind);

// Generator f, its derivative, and its convex conjugate for each divergence:
//   KL:          f(t) = t log t,   f'(t) = 1 + log t,  f*(x) = exp(x - 1)
//   reverse KL:  f(t) = -log t,    f'(t) = -1/t,       f*(x) = -1 - log(-x)
//   Pearson x2:  f(t) = (t - 1)^2, f'(t) = 2(t - 1),   f*(x) = x + x^2/4
double f_generator(FDivergenceKind kind, double t);
double f_prime(FDivergenceKind kind, double t);
double f_conjugate(FDivergenceKind kind, double x);

const char* to_string(FDivergenceKind kind);

}  // namespace tcgm
