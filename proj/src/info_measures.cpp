#include "tcgm/info_measures.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tcgm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Modality marginals of the Y-marginalized joint, one vector per axis.
std::vector<std::vector<double>> all_modality_marginals(const JointTable& table) {
  std::vector<std::vector<double>> marginals;
  marginals.reserve(static_cast<std::size_t>(table.modality_count()));
  for (int m = 0; m < table.modality_count(); ++m) {
    marginals.push_back(table.modality_marginal(m));
  }
  return marginals;
}

double product_of_marginals_at(const std::vector<std::vector<double>>& marginals,
                               const std::vector<int>& states) {
  double q = 1.0;
  for (std::size_t m = 0; m < marginals.size(); ++m) {
    q *= marginals[m][static_cast<std::size_t>(states[m])];
  }
  return q;
}

}  // namespace

double shannon_entropy(const std::vector<double>& dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double total_correlation(const JointTable& table) {
  const std::vector<double> joint = table.modality_joint();
  double tc = -shannon_entropy(joint);
  for (int m = 0; m < table.modality_count(); ++m) {
    tc += shannon_entropy(table.modality_marginal(m));
  }
  return tc;
}

double total_correlation_kl(const JointTable& table) {
  const std::vector<double> joint = table.modality_joint();
  const auto marginals = all_modality_marginals(table);
  double kl = 0.0;
  std::vector<int> states(static_cast<std::size_t>(table.modality_count()), 0);
  std::size_t flat = 0;
  do {
    const double p = joint[flat++];
    if (p > 0.0) {
      // p > 0 forces every marginal at this point to be positive.
      kl += p * std::log(p / product_of_marginals_at(marginals, states));
    }
  } while (JointTable::next_state(states, table.modality_supports()));
  return kl;
}

double conditional_total_correlation(const JointTable& table) {
  // sum_m H(X^m, Y) - M * H(Y) - (H(X^[M], Y) - H(Y))
  const double h_label = shannon_entropy(table.class_prior().weights());
  const double h_all = shannon_entropy(table.probs());
  double ctc = -(h_all - h_label);
  for (int m = 0; m < table.modality_count(); ++m) {
    const auto pair = table.marginal({m}, true);
    ctc += shannon_entropy(pair.probs()) - h_label;
  }
  return ctc;
}

double pointwise_tc(const JointTable& table, const std::vector<int>& states) {
  const std::vector<double> joint = table.modality_joint();
  const auto marginals = all_modality_marginals(table);
  const double q = product_of_marginals_at(marginals, states);
  if (!(q > 0.0)) {
    throw std::domain_error(
        "pointwise_tc: a marginal is zero at this point; the ratio is undefined");
  }
  // Index into the Y-marginalized joint.
  std::size_t flat = 0;
  for (int m = 0; m < table.modality_count(); ++m) {
    flat = flat * static_cast<std::size_t>(table.modality_supports()[static_cast<std::size_t>(m)]) +
           static_cast<std::size_t>(states[static_cast<std::size_t>(m)]);
  }
  const double p = joint[flat];
  if (!(p > 0.0)) return -kInf;  // measure-zero point under the joint
  return std::log(p / q);
}

double joint_marginal_ratio(const JointTable& table, const std::vector<int>& states) {
  return std::exp(pointwise_tc(table, states));
}

PosteriorRatio ratio_via_posteriors(const JointTable& table, const std::vector<int>& states,
                                    double ctc_tolerance) {
  if (static_cast<int>(states.size()) != table.modality_count()) {
    throw std::invalid_argument("ratio_via_posteriors: state tuple has wrong arity");
  }
  PosteriorRatio result;
  result.ctc = conditional_total_correlation(table);
  result.assumption_verified = result.ctc <= ctc_tolerance;

  const SimplexVector prior = table.class_prior();
  const int modalities = table.modality_count();
  std::vector<SimplexVector> posteriors;
  posteriors.reserve(static_cast<std::size_t>(modalities));
  for (int m = 0; m < modalities; ++m) {
    const auto all = table.modality_posteriors(m);
    posteriors.push_back(all[static_cast<std::size_t>(states[static_cast<std::size_t>(m)])]);
  }

  double total = 0.0;
  for (int c = 0; c < table.class_count(); ++c) {
    if (!(prior[c] > 0.0)) continue;  // classes without mass contribute nothing
    double term = 1.0;
    for (int m = 0; m < modalities; ++m) term *= posteriors[static_cast<std::size_t>(m)][c];
    total += term / std::pow(prior[c], modalities - 1);
  }
  result.value = total;
  return result;
}

double dual_bound_value(const JointTable& table, const Critic& g) {
  const std::vector<double> joint = table.modality_joint();
  const auto marginals = all_modality_marginals(table);
  double expectation_p = 0.0;
  double expectation_q = 0.0;
  std::vector<int> states(static_cast<std::size_t>(table.modality_count()), 0);
  std::size_t flat = 0;
  do {
    const double value = g(states);
    if (!std::isfinite(value)) {
      throw std::domain_error("dual_bound_value: critic returned a non-finite value");
    }
    expectation_p += joint[flat++] * value;
    expectation_q += product_of_marginals_at(marginals, states) * std::exp(value - 1.0);
  } while (JointTable::next_state(states, table.modality_supports()));
  return expectation_p - expectation_q;
}

double f_dual_bound(const JointTable& table, FDivergenceKind kind, const Critic& g) {
  const std::vector<double> joint = table.modality_joint();
  const auto marginals = all_modality_marginals(table);
  double expectation_p = 0.0;
  double expectation_q = 0.0;
  std::vector<int> states(static_cast<std::size_t>(table.modality_count()), 0);
  std::size_t flat = 0;
  do {
    const double value = g(states);
    if (!std::isfinite(value)) {
      throw std::domain_error("f_dual_bound: critic returned a non-finite value");
    }
    expectation_p += joint[flat++] * value;
    expectation_q += product_of_marginals_at(marginals, states) * f_conjugate(kind, value);
  } while (JointTable::next_state(states, table.modality_supports()));
  return expectation_p - expectation_q;
}

double f_divergence(const JointTable& table, FDivergenceKind kind) {
  const std::vector<double> joint = table.modality_joint();
  const auto marginals = all_modality_marginals(table);
  double divergence = 0.0;
  std::vector<int> states(static_cast<std::size_t>(table.modality_count()), 0);
  std::size_t flat = 0;
  do {
    const double p = joint[flat++];
    const double q = product_of_marginals_at(marginals, states);
    if (q > 0.0) {
      divergence += q * f_generator(kind, p / q);
    }
    // q == 0 forces p == 0; the cell contributes nothing.
  } while (JointTable::next_state(states, table.modality_supports()));
  return divergence;
}

double f_generator(FDivergenceKind kind, double t) {
  switch (kind) {
    case FDivergenceKind::kKL:
      return t > 0.0 ? t * std::log(t) : 0.0;  // t log t -> 0 as t -> 0
    case FDivergenceKind::kReverseKL:
      return t > 0.0 ? -std::log(t) : kInf;
    case FDivergenceKind::kPearsonChi2:
      return (t - 1.0) * (t - 1.0);
  }
  throw std::invalid_argument("f_generator: unsupported divergence kind");
}

double f_prime(FDivergenceKind kind, double t) {
  switch (kind) {
    case FDivergenceKind::kKL:
      return 1.0 + std::log(t);
    case FDivergenceKind::kReverseKL:
      return -1.0 / t;
    case FDivergenceKind::kPearsonChi2:
      return 2.0 * (t - 1.0);
  }
  throw std::invalid_argument("f_prime: unsupported divergence kind");
}

double f_conjugate(FDivergenceKind kind, double x) {
  switch (kind) {
    case FDivergenceKind::kKL:
      return std::exp(x - 1.0);
    case FDivergenceKind::kReverseKL:
      // Finite only on x < 0, where the supremum sits at t = -1/x.
      return x < 0.0 ? -1.0 - std::log(-x) : kInf;
    case FDivergenceKind::kPearsonChi2:
      return x + 0.25 * x * x;
  }
  throw std::invalid_argument("f_conjugate: unsupported divergence kind");
}

const char* to_string(FDivergenceKind kind) {
  switch (kind) {
    case FDivergenceKind::kKL:
      return "kl";
    case FDivergenceKind::kReverseKL:
      return "reverse-kl";
    case FDivergenceKind::kPearsonChi2:
      return "pearson-chi2";
  }
  return "unknown";
}

}  // namespace tcgm
