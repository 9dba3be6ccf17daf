#include "tcgm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tcgm/rng.hpp"

namespace tcgm {

namespace {

double log_sum_exp(const std::vector<double>& values) {
  double peak = values.front();
  for (double v : values) peak = std::max(peak, v);
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

void check_prior(const SimplexVector& prior, int class_count) {
  if (prior.size() != class_count) {
    throw std::invalid_argument("prior size does not match the class count");
  }
  if (!prior.strictly_positive()) {
    throw std::invalid_argument("prior must be strictly positive in every class");
  }
}

// (M-1) * log p_c for every class.
std::vector<double> prior_log_powers(const SimplexVector& prior, int modalities) {
  std::vector<double> logs(static_cast<std::size_t>(prior.size()));
  for (int c = 0; c < prior.size(); ++c) {
    logs[static_cast<std::size_t>(c)] = (modalities - 1) * std::log(prior[c]);
  }
  return logs;
}

// Clamped copy of the batch plus clamp-event count.
struct ClampedBatch {
  std::vector<std::vector<std::vector<double>>> values;  // [m][i][c]
  std::vector<std::vector<std::vector<double>>> logs;
  long clamp_events = 0;
};

ClampedBatch clamp_batch(const ClassifierBatchOutputs& outputs) {
  ClampedBatch batch;
  const int modalities = outputs.modality_count();
  const int n = outputs.batch_size();
  const int classes = outputs.class_count();
  batch.values.resize(static_cast<std::size_t>(modalities));
  batch.logs.resize(static_cast<std::size_t>(modalities));
  for (int m = 0; m < modalities; ++m) {
    auto& values_m = batch.values[static_cast<std::size_t>(m)];
    auto& logs_m = batch.logs[static_cast<std::size_t>(m)];
    values_m.resize(static_cast<std::size_t>(n));
    logs_m.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const SimplexVector& row = outputs.per_modality[static_cast<std::size_t>(m)]
                                                     [static_cast<std::size_t>(i)];
      auto& values_row = values_m[static_cast<std::size_t>(i)];
      auto& logs_row = logs_m[static_cast<std::size_t>(i)];
      values_row.resize(static_cast<std::size_t>(classes));
      logs_row.resize(static_cast<std::size_t>(classes));
      for (int c = 0; c < classes; ++c) {
        double w = row[c];
        if (w < kProbFloor) {
          w = kProbFloor;
          ++batch.clamp_events;
        }
        values_row[static_cast<std::size_t>(c)] = w;
        logs_row[static_cast<std::size_t>(c)] = std::log(w);
      }
    }
  }
  return batch;
}

std::vector<std::vector<std::vector<double>>> zero_grads(int modalities, int n, int classes) {
  return std::vector<std::vector<std::vector<double>>>(
      static_cast<std::size_t>(modalities),
      std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(classes), 0.0)));
}

// Ordered distinct index tuples; calls visit(tuple) for each.
template <typename Visit>
void for_each_distinct_tuple(int n, int arity, Visit&& visit) {
  std::vector<int> tuple(static_cast<std::size_t>(arity), 0);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  // Iterative depth-first walk over index choices.
  int depth = 0;
  std::vector<int> cursor(static_cast<std::size_t>(arity), -1);
  while (depth >= 0) {
    if (depth == arity) {
      visit(tuple);
      --depth;
      continue;
    }
    int next = cursor[static_cast<std::size_t>(depth)] + 1;
    if (cursor[static_cast<std::size_t>(depth)] >= 0) {
      used[static_cast<std::size_t>(tuple[static_cast<std::size_t>(depth)])] = 0;
    }
    while (next < n && used[static_cast<std::size_t>(next)]) ++next;
    if (next >= n) {
      cursor[static_cast<std::size_t>(depth)] = -1;
      --depth;
      continue;
    }
    cursor[static_cast<std::size_t>(depth)] = next;
    tuple[static_cast<std::size_t>(depth)] = next;
    used[static_cast<std::size_t>(next)] = 1;
    ++depth;
  }
}

}  // namespace

int ClassifierBatchOutputs::class_count() const {
  return (per_modality.empty() || per_modality.front().empty())
             ? 0
             : per_modality.front().front().size();
}

void ClassifierBatchOutputs::validate() const {
  if (per_modality.empty()) {
    throw std::invalid_argument("ClassifierBatchOutputs: no modalities");
  }
  const std::size_t n = per_modality.front().size();
  if (n == 0) throw std::invalid_argument("ClassifierBatchOutputs: empty batch");
  const int classes = per_modality.front().front().size();
  for (const auto& modality : per_modality) {
    if (modality.size() != n) {
      throw std::invalid_argument("ClassifierBatchOutputs: inconsistent batch sizes");
    }
    for (const auto& row : modality) {
      if (row.size() != classes) {
        throw std::invalid_argument("ClassifierBatchOutputs: inconsistent class counts");
      }
    }
  }
}

std::string LossDiagnostics::to_json() const {
  nlohmann::json j;
  j["clamp_events"] = clamp_events;
  j["penalty_tuples"] = penalty_tuples;
  j["penalty_mean"] = penalty_mean;
  j["penalty_variance"] = penalty_variance;
  return j.dump();
}

SimplexVector aggregator(const std::vector<SimplexVector>& per_modality_posteriors,
                         const SimplexVector& prior) {
  if (per_modality_posteriors.empty()) {
    throw std::invalid_argument("aggregator: need at least one posterior");
  }
  const int classes = prior.size();
  const int modalities = static_cast<int>(per_modality_posteriors.size());
  check_prior(prior, classes);
  for (const auto& h : per_modality_posteriors) {
    if (h.size() != classes) {
      throw std::invalid_argument("aggregator: posterior size does not match the prior");
    }
  }

  // Log-domain scores; exact zeros map to -inf and come back as exact zeros.
  std::vector<double> score(static_cast<std::size_t>(classes));
  double peak = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < classes; ++c) {
    double s = -(modalities - 1) * std::log(prior[c]);
    for (const auto& h : per_modality_posteriors) {
      s += std::log(h[c]);  // log(0) == -inf
    }
    score[static_cast<std::size_t>(c)] = s;
    peak = std::max(peak, s);
  }
  if (!std::isfinite(peak)) {
    throw std::domain_error("aggregator: every class has zero product");
  }
  std::vector<double> out(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    out[static_cast<std::size_t>(c)] = std::exp(score[static_cast<std::size_t>(c)] - peak);
  }
  return SimplexVector::normalized(std::move(out));
}

double reward_star(const std::vector<SimplexVector>& per_modality_posteriors,
                   const SimplexVector& prior) {
  if (per_modality_posteriors.empty()) {
    throw std::invalid_argument("reward_star: need at least one posterior");
  }
  const int classes = prior.size();
  const int modalities = static_cast<int>(per_modality_posteriors.size());
  check_prior(prior, classes);
  const std::vector<double> log_powers = prior_log_powers(prior, modalities);
  std::vector<double> scores(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    double s = -log_powers[static_cast<std::size_t>(c)];
    for (const auto& h : per_modality_posteriors) {
      s += std::log(std::max(h[c], kProbFloor));
    }
    scores[static_cast<std::size_t>(c)] = s;
  }
  return 1.0 + log_sum_exp(scores);
}

LossValueWithGrad tcg_batch(const ClassifierBatchOutputs& outputs, const SimplexVector& prior,
                            const PenaltySamplingPlan& plan) {
  outputs.validate();
  const int modalities = outputs.modality_count();
  const int n = outputs.batch_size();
  const int classes = outputs.class_count();
  check_prior(prior, classes);

  if (plan.mode == PenaltySamplingPlan::Mode::kFullEnumeration) {
    if (n < modalities) {
      throw std::invalid_argument("tcg_batch: full enumeration needs batch >= modality count");
    }
    double tuple_count = 1.0;
    for (int j = 0; j < modalities; ++j) tuple_count *= static_cast<double>(n - j);
    if (tuple_count > 1e6) {
      throw std::invalid_argument("tcg_batch: full enumeration exceeds the 10^6 tuple cap");
    }
  } else {
    if (n < 2) throw std::invalid_argument("tcg_batch: sampled mode needs batch >= 2");
    if (plan.sample_count < 1) {
      throw std::invalid_argument("tcg_batch: sampled mode needs sample_count >= 1");
    }
  }

  ClampedBatch batch = clamp_batch(outputs);
  const std::vector<double> log_powers = prior_log_powers(prior, modalities);

  LossValueWithGrad result;
  result.grads = zero_grads(modalities, n, classes);
  result.diagnostics.clamp_events = batch.clamp_events;

  // Agreement term: (1/N) sum_i log sum_c prod_m h / p^(M-1).
  double agreement = 0.0;
  std::vector<double> scores(static_cast<std::size_t>(classes));
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < classes; ++c) {
      double s = -log_powers[static_cast<std::size_t>(c)];
      for (int m = 0; m < modalities; ++m) {
        s += batch.logs[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]
                       [static_cast<std::size_t>(c)];
      }
      scores[static_cast<std::size_t>(c)] = s;
    }
    const double log_total = log_sum_exp(scores);
    agreement += log_total;
    for (int c = 0; c < classes; ++c) {
      const double weight = std::exp(scores[static_cast<std::size_t>(c)] - log_total);
      for (int m = 0; m < modalities; ++m) {
        result.grads[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]
                    [static_cast<std::size_t>(c)] +=
            weight / (n * batch.values[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]
                                      [static_cast<std::size_t>(c)]);
      }
    }
  }
  agreement /= n;

  // Penalty summand for one index tuple, accumulating its gradient with the
  // given scale. Linear domain is safe here: no logs are taken.
  std::vector<double> class_products(static_cast<std::size_t>(classes));
  const auto tuple_value = [&](const std::vector<int>& tuple, double grad_scale) {
    double total = 0.0;
    for (int c = 0; c < classes; ++c) {
      double prod = std::exp(-log_powers[static_cast<std::size_t>(c)]);
      for (int m = 0; m < modalities; ++m) {
        prod *= batch.values[static_cast<std::size_t>(m)]
                            [static_cast<std::size_t>(tuple[static_cast<std::size_t>(m)])]
                            [static_cast<std::size_t>(c)];
      }
      class_products[static_cast<std::size_t>(c)] = prod;
      total += prod;
    }
    if (grad_scale != 0.0) {
      for (int m = 0; m < modalities; ++m) {
        const std::size_t idx = static_cast<std::size_t>(tuple[static_cast<std::size_t>(m)]);
        for (int c = 0; c < classes; ++c) {
          result.grads[static_cast<std::size_t>(m)][idx][static_cast<std::size_t>(c)] -=
              grad_scale * class_products[static_cast<std::size_t>(c)] /
              batch.values[static_cast<std::size_t>(m)][idx][static_cast<std::size_t>(c)];
        }
      }
    }
    return total;
  };

  double penalty = 0.0;
  double sum_values = 0.0;
  double sum_squares = 0.0;
  long tuples = 0;

  if (plan.mode == PenaltySamplingPlan::Mode::kFullEnumeration) {
    double tuple_count = 1.0;
    for (int j = 0; j < modalities; ++j) tuple_count *= static_cast<double>(n - j);
    const double scale = 1.0 / tuple_count;
    for_each_distinct_tuple(n, modalities, [&](const std::vector<int>& tuple) {
      const double value = tuple_value(tuple, scale);
      sum_values += value;
      sum_squares += value * value;
      ++tuples;
    });
    penalty = sum_values * scale;
  } else {
    Rng rng(plan.rng_seed);
    const int draws = plan.sample_count;
    const double scale = 1.0 / draws;
    std::vector<int> tuple(static_cast<std::size_t>(modalities));
    const bool distinct_possible = n >= modalities;
    for (int k = 0; k < draws; ++k) {
      if (distinct_possible) {
        // Rejection keeps the tuple exactly uniform over distinct tuples.
        bool ok = false;
        while (!ok) {
          ok = true;
          for (int m = 0; m < modalities && ok; ++m) {
            tuple[static_cast<std::size_t>(m)] = rng.index(static_cast<std::size_t>(n));
            for (int m2 = 0; m2 < m; ++m2) {
              if (tuple[static_cast<std::size_t>(m2)] == tuple[static_cast<std::size_t>(m)]) {
                ok = false;
                break;
              }
            }
          }
        }
      } else {
        // No distinct tuple exists; independent draws are the documented
        // fallback for this degenerate batch.
        for (int m = 0; m < modalities; ++m) {
          tuple[static_cast<std::size_t>(m)] = rng.index(static_cast<std::size_t>(n));
        }
      }
      const double value = tuple_value(tuple, scale);
      sum_values += value;
      sum_squares += value * value;
      ++tuples;
    }
    penalty = sum_values * scale;
  }

  result.diagnostics.penalty_tuples = tuples;
  result.diagnostics.penalty_mean = sum_values / tuples;
  if (tuples > 1) {
    const double mean = sum_values / tuples;
    result.diagnostics.penalty_variance =
        std::max(0.0, (sum_squares - tuples * mean * mean) / (tuples - 1));
  }

  result.value = 1.0 + agreement - penalty;
  return result;
}

LossValueWithGrad cross_entropy(const std::vector<SimplexVector>& outputs,
                                const std::vector<int>& labels) {
  if (outputs.empty()) throw std::invalid_argument("cross_entropy: empty batch");
  if (outputs.size() != labels.size()) {
    throw std::invalid_argument("cross_entropy: outputs and labels differ in length");
  }
  const int n = static_cast<int>(outputs.size());
  const int classes = outputs.front().size();

  LossValueWithGrad result;
  result.grads = zero_grads(1, n, classes);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes) {
      throw std::out_of_range("cross_entropy: label out of range");
    }
    double p = outputs[static_cast<std::size_t>(i)][label];
    if (p < kProbFloor) {
      p = kProbFloor;
      ++result.diagnostics.clamp_events;
    }
    total -= std::log(p);
    result.grads[0][static_cast<std::size_t>(i)][static_cast<std::size_t>(label)] =
        -1.0 / (n * p);
  }
  result.value = total / n;
  return result;
}

double expected_tcg(const JointTable& table,
                    const std::vector<std::vector<SimplexVector>>& classifiers,
                    const SimplexVector& prior) {
  const int modalities = table.modality_count();
  const int classes = prior.size();
  check_prior(prior, classes);
  if (static_cast<int>(classifiers.size()) != modalities) {
    throw std::invalid_argument("expected_tcg: need one classifier map per modality");
  }
  for (int m = 0; m < modalities; ++m) {
    if (static_cast<int>(classifiers[static_cast<std::size_t>(m)].size()) !=
        table.modality_supports()[static_cast<std::size_t>(m)]) {
      throw std::invalid_argument("expected_tcg: classifier map does not cover the support");
    }
  }

  const std::vector<double> joint = table.modality_joint();
  std::vector<std::vector<double>> marginals;
  for (int m = 0; m < modalities; ++m) marginals.push_back(table.modality_marginal(m));
  const std::vector<double> log_powers = prior_log_powers(prior, modalities);

  double agreement = 0.0;
  double penalty = 0.0;
  std::vector<double> scores(static_cast<std::size_t>(classes));
  std::vector<int> states(static_cast<std::size_t>(modalities), 0);
  std::size_t flat = 0;
  do {
    double product_weight = 1.0;
    for (int m = 0; m < modalities; ++m) {
      product_weight *= marginals[static_cast<std::size_t>(m)]
                                 [static_cast<std::size_t>(states[static_cast<std::size_t>(m)])];
    }
    double linear_total = 0.0;
    for (int c = 0; c < classes; ++c) {
      double s = -log_powers[static_cast<std::size_t>(c)];
      for (int m = 0; m < modalities; ++m) {
        const SimplexVector& h = classifiers[static_cast<std::size_t>(m)]
                                            [static_cast<std::size_t>(states[static_cast<std::size_t>(m)])];
        s += std::log(std::max(h[c], kProbFloor));
      }
      scores[static_cast<std::size_t>(c)] = s;
      linear_total += std::exp(s);
    }
    const double p = joint[flat++];
    if (p > 0.0) agreement += p * log_sum_exp(scores);
    penalty += product_weight * linear_total;
  } while (JointTable::next_state(states, table.modality_supports()));

  return 1.0 + agreement - penalty;
}

std::vector<std::vector<SimplexVector>> bayes_posterior_maps(const JointTable& table) {
  std::vector<std::vector<SimplexVector>> maps;
  maps.reserve(static_cast<std::size_t>(table.modality_count()));
  for (int m = 0; m < table.modality_count(); ++m) {
    maps.push_back(table.modality_posteriors(m));
  }
  return maps;
}

}  // namespace tcgm
