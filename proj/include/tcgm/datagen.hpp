// Synthetic conditionally independent multi-modal data: Gaussian and
// discrete generators, exact Bayes-posterior oracles for the Gaussian
// family, the k-means++ baseline, and the dataset file format.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcgm/joint_table.hpp"
#include "tcgm/net.hpp"
#include "tcgm/simplex.hpp"

namespace tcgm {

// Per-class diagonal Gaussians for one modality.
struct GaussianModality {
  std::vector<std::vector<double>> means;      // class_count x dim
  std::vector<std::vector<double>> variances;  // class_count x dim, all > 0
};

struct GaussianModalitySpec {
  SimplexVector prior = SimplexVector::uniform(1);
  std::vector<GaussianModality> modalities;

  int class_count() const { return prior.size(); }
  int modality_count() const { return static_cast<int>(modalities.size()); }
  std::vector<int> dims() const;
  void validate() const;

  // Class means evenly spaced on a circle of the given radius in the first
  // two feature dimensions, isotropic variance sigma^2, uniform prior. Each
  // modality's constellation is rotated by a different phase so the views
  // are genuinely distinct. dim >= 2.
  static GaussianModalitySpec circle(int modality_count, int class_count, int dim,
                                     double radius, double sigma);
};

enum class Split { kTrain, kVal, kTest };
const char* to_string(Split split);
Split split_from_string(const std::string& name);

struct Record {
  std::vector<std::vector<double>> features;  // one vector per modality
  std::optional<int> label;
  Split split = Split::kTrain;
};

struct MultiModalDataset {
  std::vector<Record> records;
  int modality_count = 0;
  int class_count = 0;
  std::vector<int> dims;

  std::vector<std::size_t> split_indices(Split split) const;
  std::size_t labeled_train_count() const;
  void validate() const;
};

// Labels drawn from the prior, modalities independently given the label.
// Splits are assigned 60/20/20 by position; label_rate masking applies to
// the train split only. Deterministic per seed.
MultiModalDataset generate_gaussian(const GaussianModalitySpec& spec, int n, std::uint64_t seed,
                                    double label_rate = 1.0);

// Exact P(Y | X^m = x) from the Gaussian densities and the prior.
SimplexVector gaussian_modality_posterior(const GaussianModalitySpec& spec, int m,
                                          const std::vector<double>& x);
// Exact P(Y | X^[M] = x) in closed form.
SimplexVector gaussian_joint_posterior(const GaussianModalitySpec& spec,
                                       const std::vector<std::vector<double>>& x);
// Fraction of a split predicted correctly by the exact joint posterior.
double bayes_oracle_accuracy(const GaussianModalitySpec& spec, const MultiModalDataset& data,
                             Split split);

// Samples (x^[M], y) from the table; modality states are one-hot encoded.
MultiModalDataset generate_discrete(const JointTable& table, int n, std::uint64_t seed,
                                    double label_rate = 1.0);

// Removes labels from the train split uniformly at random so the labeled
// fraction equals rate within one record. Features are never touched; val
// and test labels are kept for evaluation.
void apply_label_rate(MultiModalDataset& data, double rate, std::uint64_t seed);

// All modality features of a split concatenated row-wise, plus the labels.
Matrix concat_features(const MultiModalDataset& data, Split split);
std::vector<int> split_labels(const MultiModalDataset& data, Split split);

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
};

// k-means++ seeding followed by Lloyd iterations until convergence or
// max_iters. Empty clusters are repaired by reseeding onto the farthest
// point. Deterministic per seed.
KMeansResult kmeans_pp(const Matrix& features, int k, std::uint64_t seed, int max_iters = 100);

// JSON Lines, one record per line:
//   {"x": [[...], ...], "y": <int or null>, "split": "train"|"val"|"test"}
void save_dataset(const MultiModalDataset& data, const std::string& jsonl_path);
MultiModalDataset load_dataset(const std::string& jsonl_path);

// Companion manifest with dims, modality count, class count, generator
// parameters and seed.
void save_manifest(const std::string& path, const MultiModalDataset& data,
                   const std::string& generator_json, std::uint64_t seed, double label_rate);

std::string gaussian_spec_to_json(const GaussianModalitySpec& spec);
GaussianModalitySpec gaussian_spec_from_json(const std::string& text);

}  // namespace tcgm
