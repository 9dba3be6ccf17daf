#include "tcgm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tcgm/metrics.hpp"
#include "tcgm/rng.hpp"

namespace tcgm {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Deterministic shortest-exact formatting for report files.
std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

Matrix gather_features(const MultiModalDataset& data, const std::vector<std::size_t>& indices,
                       int modality) {
  Matrix out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    out.push_back(data.records[idx].features[static_cast<std::size_t>(modality)]);
  }
  return out;
}

std::vector<int> gather_labels(const MultiModalDataset& data,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(*data.records[idx].label);
  return out;
}

// Batch boundaries over `count` items in steps of `batch`; a trailing batch
// of one sample is folded into its predecessor so every batch that reaches
// the gain loss has at least two samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t count,
                                                              std::size_t batch,
                                                              bool fold_singleton) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < count; start += batch) {
    ranges.emplace_back(start, std::min(count, start + batch));
  }
  if (fold_singleton && ranges.size() >= 2 &&
      ranges.back().second - ranges.back().first == 1) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  return ranges;
}

struct EvalOutput {
  std::vector<std::vector<int>> modality_predictions;  // [m][i]
  std::vector<int> aggregator_predictions;
  std::vector<double> positive_scores;  // aggregator mass on class 1
  std::vector<int> labels;
};

EvalOutput evaluate_split(const MultiModalDataset& data, const std::vector<ClassifierNet>& nets,
                          const SimplexVector& prior, const std::vector<std::size_t>& indices) {
  EvalOutput out;
  const int modalities = static_cast<int>(nets.size());
  out.modality_predictions.resize(static_cast<std::size_t>(modalities));
  out.labels = gather_labels(data, indices);

  std::vector<std::vector<SimplexVector>> rows(static_cast<std::size_t>(modalities));
  for (int m = 0; m < modalities; ++m) {
    rows[static_cast<std::size_t>(m)] =
        forward_simplex(nets[static_cast<std::size_t>(m)], gather_features(data, indices, m));
    for (const auto& row : rows[static_cast<std::size_t>(m)]) {
      out.modality_predictions[static_cast<std::size_t>(m)].push_back(row.argmax());
    }
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::vector<SimplexVector> per_modality;
    per_modality.reserve(static_cast<std::size_t>(modalities));
    for (int m = 0; m < modalities; ++m) {
      per_modality.push_back(rows[static_cast<std::size_t>(m)][i]);
    }
    const SimplexVector agg = aggregator(per_modality, prior);
    out.aggregator_predictions.push_back(agg.argmax());
    out.positive_scores.push_back(agg.size() == 2 ? agg[1] : 0.0);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(lr_labeled >= 0.0) || !(lr_unlabeled >= 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
  }
  if (!(label_rate > 0.0) || label_rate > 1.0) {
    throw std::invalid_argument("TrainConfig: label_rate must be in (0, 1]");
  }
  if (prior_mode == PriorMode::kFixedGiven && !fixed_prior) {
    throw std::invalid_argument("TrainConfig: fixed prior mode needs a prior");
  }
  if (penalty_mode == PenaltySamplingPlan::Mode::kSampled && penalty_samples < 0) {
    throw std::invalid_argument("TrainConfig: penalty_samples must be >= 0");
  }
}

SimplexVector estimate_prior(const std::vector<int>& labels, int class_count, double floor) {
  if (labels.empty()) throw std::invalid_argument("estimate_prior: empty label set");
  if (class_count < 1) throw std::invalid_argument("estimate_prior: class_count must be >= 1");
  std::vector<double> freq(static_cast<std::size_t>(class_count), 0.0);
  for (int y : labels) {
    if (y < 0 || y >= class_count) throw std::out_of_range("estimate_prior: label out of range");
    freq[static_cast<std::size_t>(y)] += 1.0;
  }
  for (double& f : freq) f = std::max(f / static_cast<double>(labels.size()), floor);
  return SimplexVector::normalized(std::move(freq));
}

Prediction predict(const std::vector<ClassifierNet>& nets, const SimplexVector& prior,
                   const std::vector<std::vector<double>>& features) {
  if (nets.empty() || nets.size() != features.size()) {
    throw std::invalid_argument("predict: one feature vector per net required");
  }
  std::vector<SimplexVector> per_modality;
  per_modality.reserve(nets.size());
  for (std::size_t m = 0; m < nets.size(); ++m) {
    per_modality.push_back(forward_simplex(nets[m], {features[m]}).front());
  }
  Prediction p{aggregator(per_modality, prior), 0};
  p.label = p.distribution.argmax();
  return p;
}

RunReport train(const MultiModalDataset& data, std::vector<ClassifierNet>& nets,
                const TrainConfig& config) {
  config.validate();
  data.validate();
  const int modalities = data.modality_count;
  const int classes = data.class_count;
  if (static_cast<int>(nets.size()) != modalities) {
    throw std::invalid_argument("train: need one net per modality");
  }
  for (int m = 0; m < modalities; ++m) {
    if (nets[static_cast<std::size_t>(m)].input_dim() != data.dims[static_cast<std::size_t>(m)] ||
        nets[static_cast<std::size_t>(m)].class_count() != classes) {
      throw std::invalid_argument("train: net " + std::to_string(m) +
                                  " does not match the dataset shape");
    }
  }

  const auto train_idx = data.split_indices(Split::kTrain);
  const auto val_idx = data.split_indices(Split::kVal);
  const auto test_idx = data.split_indices(Split::kTest);
  std::vector<std::size_t> labeled_idx;
  for (std::size_t idx : train_idx) {
    if (data.records[idx].label) labeled_idx.push_back(idx);
  }

  const auto compute_prior = [&]() -> SimplexVector {
    switch (config.prior_mode) {
      case PriorMode::kFixedUniform:
        return SimplexVector::uniform(classes);
      case PriorMode::kFixedGiven:
        return *config.fixed_prior;
      case PriorMode::kEstimatedFromLabeled: {
        if (labeled_idx.empty()) {
          throw std::invalid_argument("train: prior estimation needs labeled samples");
        }
        return estimate_prior(gather_labels(data, labeled_idx), classes);
      }
    }
    throw std::invalid_argument("train: unknown prior mode");
  };

  SimplexVector prior = compute_prior();

  std::vector<OptimizerState> ce_opt, tc_opt;
  for (int m = 0; m < modalities; ++m) {
    ce_opt.push_back(config.optimizer == OptimizerState::Kind::kSgd
                         ? OptimizerState::sgd(config.lr_labeled)
                         : OptimizerState::adam(config.lr_labeled));
    tc_opt.push_back(config.optimizer == OptimizerState::Kind::kSgd
                         ? OptimizerState::sgd(config.lr_unlabeled)
                         : OptimizerState::adam(config.lr_unlabeled));
  }

  RunReport report;
  report.label_rate = config.label_rate;
  report.seed = config.seed;

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  std::uint64_t penalty_counter = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.reestimate_prior_per_epoch &&
        config.prior_mode == PriorMode::kEstimatedFromLabeled) {
      prior = compute_prior();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.ce_loss.assign(static_cast<std::size_t>(modalities), 0.0);

    // Labeled phase: per-modality cross-entropy sweeps.
    const auto ce_start = std::chrono::steady_clock::now();
    for (int m = 0; m < modalities; ++m) {
      auto order = labeled_idx;
      Rng shuffle_rng(derive_seed(config.seed, "ce-shuffle",
                                  static_cast<std::uint64_t>(epoch) * modalities +
                                      static_cast<std::uint64_t>(m)));
      shuffle_rng.shuffle(order);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (const auto& [lo, hi] : batch_ranges(order.size(), batch, false)) {
        const std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                             order.begin() + static_cast<std::ptrdiff_t>(hi));
        ForwardCache cache;
        const auto rows =
            forward_simplex(nets[static_cast<std::size_t>(m)], gather_features(data, slice, m), &cache);
        const auto ce = cross_entropy(rows, gather_labels(data, slice));
        const auto grads = backward(nets[static_cast<std::size_t>(m)], cache, ce.grads[0]);
        step(nets[static_cast<std::size_t>(m)], grads, ce_opt[static_cast<std::size_t>(m)]);
        loss_sum += ce.value;
        ++batches;
      }
      rec.ce_loss[static_cast<std::size_t>(m)] = batches ? loss_sum / batches : 0.0;
    }
    rec.ce_seconds = seconds_since(ce_start);
    rec.phase_log.push_back("ce");

    // Gain phase: joint sweep over labeled plus unlabeled train records.
    const auto tc_start = std::chrono::steady_clock::now();
    auto order = train_idx;
    Rng shuffle_rng(derive_seed(config.seed, "tc-shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double gain_sum = 0.0;
    std::size_t gain_batches = 0;
    for (const auto& [lo, hi] : batch_ranges(order.size(), batch, true)) {
      const std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                           order.begin() + static_cast<std::ptrdiff_t>(hi));
      const int n = static_cast<int>(slice.size());
      if (n < 2) continue;  // a lone sample has no gain signal

      ClassifierBatchOutputs outputs;
      std::vector<ForwardCache> caches(static_cast<std::size_t>(modalities));
      for (int m = 0; m < modalities; ++m) {
        outputs.per_modality.push_back(forward_simplex(nets[static_cast<std::size_t>(m)],
                                                       gather_features(data, slice, m),
                                                       &caches[static_cast<std::size_t>(m)]));
      }

      PenaltySamplingPlan plan;
      if (config.penalty_mode == PenaltySamplingPlan::Mode::kFullEnumeration && n >= modalities) {
        double tuple_count = 1.0;
        for (int j = 0; j < modalities; ++j) tuple_count *= static_cast<double>(n - j);
        if (tuple_count <= 1e6) {
          plan = PenaltySamplingPlan::full_enumeration();
        } else {
          plan = PenaltySamplingPlan::sampled(
              n, derive_seed(config.seed, "penalty", penalty_counter));
        }
      } else {
        // Sampled by request, or the fallback when the batch is smaller
        // than the modality count.
        const int draws = config.penalty_samples > 0 ? config.penalty_samples : n;
        plan = PenaltySamplingPlan::sampled(draws,
                                            derive_seed(config.seed, "penalty", penalty_counter));
      }
      ++penalty_counter;

      const auto gain = tcg_batch(outputs, prior, plan);
      gain_sum += gain.value;
      ++gain_batches;

      for (int m = 0; m < modalities; ++m) {
        // Ascend the gain: the descent loss is its negation.
        Matrix upstream = gain.grads[static_cast<std::size_t>(m)];
        for (auto& row : upstream) {
          for (double& v : row) v = -v;
        }
        const auto grads =
            backward(nets[static_cast<std::size_t>(m)], caches[static_cast<std::size_t>(m)], upstream);
        step(nets[static_cast<std::size_t>(m)], grads, tc_opt[static_cast<std::size_t>(m)]);
      }
    }
    rec.tcg_value = gain_batches ? gain_sum / gain_batches : 0.0;
    rec.tc_seconds = seconds_since(tc_start);
    rec.phase_log.push_back("tc");

    // Validation metrics.
    if (!val_idx.empty()) {
      const EvalOutput eval = evaluate_split(data, nets, prior, val_idx);
      for (int m = 0; m < modalities; ++m) {
        rec.modality_accuracy.push_back(
            accuracy(eval.modality_predictions[static_cast<std::size_t>(m)], eval.labels));
      }
      rec.aggregator_accuracy = accuracy(eval.aggregator_predictions, eval.labels);
      if (classes == 2) rec.auc = auc_score(eval.positive_scores, eval.labels);
      rec.alignment = align_permutation(eval.aggregator_predictions, eval.labels, classes);
    } else {
      rec.modality_accuracy.assign(static_cast<std::size_t>(modalities), 0.0);
    }

    report.epochs.push_back(std::move(rec));
  }

  report.prior = prior;

  if (!test_idx.empty()) {
    const EvalOutput eval = evaluate_split(data, nets, prior, test_idx);
    for (int m = 0; m < modalities; ++m) {
      report.test.modality_accuracy.push_back(
          accuracy(eval.modality_predictions[static_cast<std::size_t>(m)], eval.labels));
    }
    report.test.aggregator_accuracy = accuracy(eval.aggregator_predictions, eval.labels);
    report.test.aligned_accuracy =
        aligned_accuracy(eval.aggregator_predictions, eval.labels, classes);
    if (classes == 2) report.test.auc = auc_score(eval.positive_scores, eval.labels);
  }
  return report;
}

std::string RunReport::to_json(const std::string& method) const {
  nlohmann::json j;
  j["method"] = method;
  j["seed"] = seed;
  j["label_rate"] = label_rate;
  j["prior"] = prior.weights();
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json je;
    je["epoch"] = e.epoch;
    je["ce_loss"] = e.ce_loss;
    je["tcg_value"] = e.tcg_value;
    je["modality_accuracy"] = e.modality_accuracy;
    je["aggregator_accuracy"] = e.aggregator_accuracy;
    if (e.auc) je["auc"] = *e.auc;
    je["alignment"] = e.alignment;
    je["phase_log"] = e.phase_log;
    je["ce_seconds"] = e.ce_seconds;
    je["tc_seconds"] = e.tc_seconds;
    epochs_json.push_back(std::move(je));
  }
  j["epochs"] = std::move(epochs_json);
  nlohmann::json jt;
  jt["modality_accuracy"] = test.modality_accuracy;
  jt["aggregator_accuracy"] = test.aggregator_accuracy;
  jt["aligned_accuracy"] = test.aligned_accuracy;
  if (test.auc) jt["auc"] = *test.auc;
  j["test"] = std::move(jt);
  return j.dump(2);
}

std::string RunReport::to_csv(const std::string& method) const {
  const int modalities =
      epochs.empty() ? static_cast<int>(test.modality_accuracy.size())
                     : static_cast<int>(epochs.front().modality_accuracy.size());
  std::ostringstream out;
  out << "epoch,method,modality,ce_loss,tcg_value";
  for (int m = 1; m <= modalities; ++m) out << ",acc_m" << m;
  out << ",acc_agg,auc,seed,label_rate\n";
  for (const auto& e : epochs) {
    double ce_mean = 0.0;
    for (double v : e.ce_loss) ce_mean += v;
    if (!e.ce_loss.empty()) ce_mean /= static_cast<double>(e.ce_loss.size());
    out << e.epoch << ',' << method << ',' << modalities << ',' << format_double(ce_mean) << ','
        << format_double(e.tcg_value);
    for (double acc : e.modality_accuracy) out << ',' << format_double(acc);
    out << ',' << format_double(e.aggregator_accuracy) << ','
        << (e.auc ? format_double(*e.auc) : "") << ',' << seed << ','
        << format_double(label_rate) << '\n';
  }
  return out.str();
}

}  // namespace tcgm
