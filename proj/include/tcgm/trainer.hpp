// Alternating optimization: per epoch, every classifier takes cross-entropy
// sweeps over the labeled split, then all classifiers take joint
// total-correlation-gain sweeps over the full train split (labeled plus
// unlabeled). Setting lr_unlabeled to zero reduces the procedure to
// independent supervised training, parameter for parameter.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcgm/datagen.hpp"
#include "tcgm/losses.hpp"
#include "tcgm/net.hpp"
#include "tcgm/simplex.hpp"

namespace tcgm {

enum class PriorMode { kFixedUniform, kFixedGiven, kEstimatedFromLabeled };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr_labeled = 0.01;
  double lr_unlabeled = 1e-4;
  OptimizerState::Kind optimizer = OptimizerState::Kind::kAdam;

  PriorMode prior_mode = PriorMode::kEstimatedFromLabeled;
  std::optional<SimplexVector> fixed_prior;  // kFixedGiven
  // The prior is normally estimated once before training; this re-estimates
  // it from the labeled split at the start of every epoch instead.
  bool reestimate_prior_per_epoch = false;

  PenaltySamplingPlan::Mode penalty_mode = PenaltySamplingPlan::Mode::kSampled;
  int penalty_samples = 0;  // Sampled mode; 0 means one draw per batch sample

  double label_rate = 1.0;  // carried into reports; masking itself is datagen's job
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::vector<double> ce_loss;            // per modality, mean over batches
  double tcg_value = 0.0;                 // mean batch gain over the TC phase
  std::vector<double> modality_accuracy;  // validation split
  double aggregator_accuracy = 0.0;       // validation split
  std::optional<double> auc;              // validation, binary tasks
  std::vector<int> alignment;             // best label permutation on validation
  std::vector<std::string> phase_log;     // phases in execution order
  double ce_seconds = 0.0;
  double tc_seconds = 0.0;
};

struct FinalMetrics {
  std::vector<double> modality_accuracy;
  double aggregator_accuracy = 0.0;
  double aligned_accuracy = 0.0;  // after best class permutation
  std::optional<double> auc;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  FinalMetrics test;
  SimplexVector prior = SimplexVector::uniform(1);  // the prior used by the loss
  double label_rate = 1.0;
  std::uint64_t seed = 0;

  std::string to_json(const std::string& method) const;
  // One row per epoch; fixed column schema, documented in the README.
  std::string to_csv(const std::string& method) const;
};

// Empirical class frequencies floored at `floor` and renormalized, so the
// result is strictly positive even when a class is absent.
SimplexVector estimate_prior(const std::vector<int>& labels, int class_count,
                             double floor = 1e-3);

struct Prediction {
  SimplexVector distribution;
  int label = 0;  // argmax, ties to the lowest class id
};

Prediction predict(const std::vector<ClassifierNet>& nets, const SimplexVector& prior,
                   const std::vector<std::vector<double>>& features);

// Runs the full schedule on the dataset, mutating the nets in place, and
// returns the per-epoch report plus test metrics. Deterministic given
// (dataset, nets, config).
RunReport train(const MultiModalDataset& data, std::vector<ClassifierNet>& nets,
                const TrainConfig& config);

}  // namespace tcgm
