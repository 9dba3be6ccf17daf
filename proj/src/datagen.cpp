#include "tcgm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tcgm/rng.hpp"

namespace tcgm {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

std::vector<double> log_gaussian_class_scores(const GaussianModality& modality,
                                              const SimplexVector& prior,
                                              const std::vector<double>& x) {
  const int classes = prior.size();
  std::vector<double> scores(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    const auto& mean = modality.means[static_cast<std::size_t>(c)];
    const auto& var = modality.variances[static_cast<std::size_t>(c)];
    if (x.size() != mean.size()) {
      throw std::invalid_argument("gaussian posterior: feature width mismatch");
    }
    double log_density = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
      const double diff = x[d] - mean[d];
      log_density -= 0.5 * (diff * diff / var[d] + std::log(kTwoPi * var[d]));
    }
    scores[static_cast<std::size_t>(c)] = std::log(prior[c]) + log_density;
  }
  return scores;
}

SimplexVector softmax_scores(std::vector<double> scores) {
  double peak = scores.front();
  for (double s : scores) peak = std::max(peak, s);
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - peak);
    total += s;
  }
  for (double& s : scores) s /= total;
  return SimplexVector::trusted(std::move(scores));
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double total = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    total += diff * diff;
  }
  return total;
}

}  // namespace

std::vector<int> GaussianModalitySpec::dims() const {
  std::vector<int> out;
  out.reserve(modalities.size());
  for (const auto& m : modalities) {
    out.push_back(static_cast<int>(m.means.front().size()));
  }
  return out;
}

void GaussianModalitySpec::validate() const {
  if (modalities.empty()) throw std::invalid_argument("GaussianModalitySpec: no modalities");
  const int classes = class_count();
  for (const auto& m : modalities) {
    if (static_cast<int>(m.means.size()) != classes ||
        static_cast<int>(m.variances.size()) != classes) {
      throw std::invalid_argument("GaussianModalitySpec: need one mean/variance row per class");
    }
    const std::size_t dim = m.means.front().size();
    if (dim == 0) throw std::invalid_argument("GaussianModalitySpec: zero-dimensional modality");
    for (int c = 0; c < classes; ++c) {
      if (m.means[static_cast<std::size_t>(c)].size() != dim ||
          m.variances[static_cast<std::size_t>(c)].size() != dim) {
        throw std::invalid_argument("GaussianModalitySpec: ragged mean/variance rows");
      }
      for (double v : m.variances[static_cast<std::size_t>(c)]) {
        if (!(v > 0.0)) throw std::invalid_argument("GaussianModalitySpec: variances must be > 0");
      }
    }
  }
}

GaussianModalitySpec GaussianModalitySpec::circle(int modality_count, int class_count, int dim,
                                                  double radius, double sigma) {
  if (modality_count < 1 || class_count < 1 || dim < 2) {
    throw std::invalid_argument("circle spec: need modalities >= 1, classes >= 1, dim >= 2");
  }
  if (!(radius >= 0.0) || !(sigma > 0.0)) {
    throw std::invalid_argument("circle spec: radius must be >= 0 and sigma > 0");
  }
  GaussianModalitySpec spec;
  spec.prior = SimplexVector::uniform(class_count);
  for (int m = 0; m < modality_count; ++m) {
    GaussianModality modality;
    const double phase = kTwoPi * m / (modality_count * class_count);
    for (int c = 0; c < class_count; ++c) {
      std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
      const double angle = kTwoPi * c / class_count + phase;
      mean[0] = radius * std::cos(angle);
      mean[1] = radius * std::sin(angle);
      modality.means.push_back(std::move(mean));
      modality.variances.emplace_back(static_cast<std::size_t>(dim), sigma * sigma);
    }
    spec.modalities.push_back(std::move(modality));
  }
  return spec;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split: " + name);
}

std::vector<std::size_t> MultiModalDataset::split_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

std::size_t MultiModalDataset::labeled_train_count() const {
  std::size_t count = 0;
  for (const auto& r : records) {
    if (r.split == Split::kTrain && r.label.has_value()) ++count;
  }
  return count;
}

void MultiModalDataset::validate() const {
  if (modality_count < 1) throw std::invalid_argument("dataset: modality_count must be >= 1");
  if (class_count < 1) throw std::invalid_argument("dataset: class_count must be >= 1");
  if (static_cast<int>(dims.size()) != modality_count) {
    throw std::invalid_argument("dataset: dims must list one width per modality");
  }
  for (const auto& r : records) {
    if (static_cast<int>(r.features.size()) != modality_count) {
      throw std::invalid_argument("dataset: record has wrong modality count");
    }
    for (int m = 0; m < modality_count; ++m) {
      if (static_cast<int>(r.features[static_cast<std::size_t>(m)].size()) !=
          dims[static_cast<std::size_t>(m)]) {
        throw std::invalid_argument("dataset: record feature width mismatch");
      }
    }
    if (r.label && (*r.label < 0 || *r.label >= class_count)) {
      throw std::invalid_argument("dataset: label out of range");
    }
  }
}

MultiModalDataset generate_gaussian(const GaussianModalitySpec& spec, int n, std::uint64_t seed,
                                    double label_rate) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("generate_gaussian: n must be >= 1");

  MultiModalDataset data;
  data.modality_count = spec.modality_count();
  data.class_count = spec.class_count();
  data.dims = spec.dims();
  data.records.reserve(static_cast<std::size_t>(n));

  Rng rng(derive_seed(seed, "gaussian-gen"));
  const DiscreteSampler label_sampler(spec.prior.weights());
  const int n_train = static_cast<int>(std::llround(0.6 * n));
  const int n_val = static_cast<int>(std::llround(0.2 * n));

  for (int i = 0; i < n; ++i) {
    Record r;
    const int y = label_sampler.sample(rng);
    r.label = y;
    r.split = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    for (const auto& modality : spec.modalities) {
      const auto& mean = modality.means[static_cast<std::size_t>(y)];
      const auto& var = modality.variances[static_cast<std::size_t>(y)];
      std::vector<double> x(mean.size());
      for (std::size_t d = 0; d < mean.size(); ++d) {
        x[d] = rng.normal(mean[d], std::sqrt(var[d]));
      }
      r.features.push_back(std::move(x));
    }
    data.records.push_back(std::move(r));
  }

  apply_label_rate(data, label_rate, seed);
  return data;
}

SimplexVector gaussian_modality_posterior(const GaussianModalitySpec& spec, int m,
                                          const std::vector<double>& x) {
  if (m < 0 || m >= spec.modality_count()) {
    throw std::out_of_range("gaussian_modality_posterior: modality out of range");
  }
  return softmax_scores(
      log_gaussian_class_scores(spec.modalities[static_cast<std::size_t>(m)], spec.prior, x));
}

SimplexVector gaussian_joint_posterior(const GaussianModalitySpec& spec,
                                       const std::vector<std::vector<double>>& x) {
  if (static_cast<int>(x.size()) != spec.modality_count()) {
    throw std::invalid_argument("gaussian_joint_posterior: wrong modality count");
  }
  std::vector<double> scores(static_cast<std::size_t>(spec.class_count()), 0.0);
  for (int c = 0; c < spec.class_count(); ++c) {
    scores[static_cast<std::size_t>(c)] = std::log(spec.prior[c]);
  }
  for (int m = 0; m < spec.modality_count(); ++m) {
    const auto modality_scores = log_gaussian_class_scores(
        spec.modalities[static_cast<std::size_t>(m)], spec.prior, x[static_cast<std::size_t>(m)]);
    for (int c = 0; c < spec.class_count(); ++c) {
      // modality_scores already include one copy of the log prior.
      scores[static_cast<std::size_t>(c)] +=
          modality_scores[static_cast<std::size_t>(c)] - std::log(spec.prior[c]);
    }
  }
  return softmax_scores(std::move(scores));
}

double bayes_oracle_accuracy(const GaussianModalitySpec& spec, const MultiModalDataset& data,
                             Split split) {
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& r : data.records) {
    if (r.split != split || !r.label) continue;
    ++total;
    if (gaussian_joint_posterior(spec, r.features).argmax() == *r.label) ++matched;
  }
  if (total == 0) throw std::invalid_argument("bayes_oracle_accuracy: no labeled records");
  return static_cast<double>(matched) / static_cast<double>(total);
}

MultiModalDataset generate_discrete(const JointTable& table, int n, std::uint64_t seed,
                                    double label_rate) {
  if (n < 1) throw std::invalid_argument("generate_discrete: n must be >= 1");
  MultiModalDataset data;
  data.modality_count = table.modality_count();
  data.class_count = table.class_count();
  data.dims = table.modality_supports();
  data.records.reserve(static_cast<std::size_t>(n));

  Rng rng(derive_seed(seed, "discrete-gen"));
  const DiscreteSampler cell_sampler(table.probs());
  const int n_train = static_cast<int>(std::llround(0.6 * n));
  const int n_val = static_cast<int>(std::llround(0.2 * n));

  for (int i = 0; i < n; ++i) {
    std::size_t flat = static_cast<std::size_t>(cell_sampler.sample(rng));
    Record r;
    r.split = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    const int y = static_cast<int>(flat % static_cast<std::size_t>(table.class_count()));
    flat /= static_cast<std::size_t>(table.class_count());
    r.label = y;
    // Decode modality states from the flat index, last axis fastest.
    std::vector<int> states(static_cast<std::size_t>(table.modality_count()));
    for (int m = table.modality_count() - 1; m >= 0; --m) {
      const std::size_t support =
          static_cast<std::size_t>(table.modality_supports()[static_cast<std::size_t>(m)]);
      states[static_cast<std::size_t>(m)] = static_cast<int>(flat % support);
      flat /= support;
    }
    for (int m = 0; m < table.modality_count(); ++m) {
      std::vector<double> one_hot(
          static_cast<std::size_t>(table.modality_supports()[static_cast<std::size_t>(m)]), 0.0);
      one_hot[static_cast<std::size_t>(states[static_cast<std::size_t>(m)])] = 1.0;
      r.features.push_back(std::move(one_hot));
    }
    data.records.push_back(std::move(r));
  }

  apply_label_rate(data, label_rate, seed);
  return data;
}

void apply_label_rate(MultiModalDataset& data, double rate, std::uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0) {
    throw std::invalid_argument("apply_label_rate: rate must be in (0, 1]");
  }
  if (rate == 1.0) return;
  auto train = data.split_indices(Split::kTrain);
  const auto target = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(train.size())));
  Rng rng(derive_seed(seed, "label-mask"));
  rng.shuffle(train);
  for (std::size_t k = target; k < train.size(); ++k) {
    data.records[train[k]].label.reset();
  }
}

Matrix concat_features(const MultiModalDataset& data, Split split) {
  Matrix out;
  for (const auto& r : data.records) {
    if (r.split != split) continue;
    std::vector<double> row;
    for (const auto& x : r.features) row.insert(row.end(), x.begin(), x.end());
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<int> split_labels(const MultiModalDataset& data, Split split) {
  std::vector<int> out;
  for (const auto& r : data.records) {
    if (r.split != split) continue;
    out.push_back(r.label ? *r.label : -1);
  }
  return out;
}

KMeansResult kmeans_pp(const Matrix& features, int k, std::uint64_t seed, int max_iters) {
  const std::size_t n = features.size();
  if (k < 1) throw std::invalid_argument("kmeans_pp: k must be >= 1");
  if (static_cast<std::size_t>(k) > n) throw std::invalid_argument("kmeans_pp: k exceeds point count");

  Rng rng(seed);
  KMeansResult result;
  result.centroids.reserve(static_cast<std::size_t>(k));

  // Seeding: first centroid uniform, the rest by squared-distance weighting.
  result.centroids.push_back(features[static_cast<std::size_t>(rng.index(n))]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(features[i], result.centroids.back()));
      total += nearest[i];
    }
    std::size_t chosen;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double running = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        running += nearest[i];
        if (running >= u) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<std::size_t>(rng.index(n));  // all points coincide
    }
    result.centroids.push_back(features[chosen]);
  }

  result.assignments.assign(n, 0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment step.
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = squared_distance(features[i], result.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(features[i], result.centroids[static_cast<std::size_t>(c)]);
        if (d < best_dist) {
          best_dist = d;
          best = c;
        }
      }
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
      inertia += best_dist;
    }
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;
    if (!changed && iter > 0) break;

    // Update step.
    const std::size_t dim = features.front().size();
    Matrix sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = result.assignments[i];
      ++counts[static_cast<std::size_t>(c)];
      for (std::size_t d = 0; d < dim; ++d) {
        sums[static_cast<std::size_t>(c)][d] += features[i][d];
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          result.centroids[static_cast<std::size_t>(c)][d] =
              sums[static_cast<std::size_t>(c)][d] / counts[static_cast<std::size_t>(c)];
        }
      } else {
        // Empty cluster: reseed onto the point farthest from its centroid.
        std::size_t farthest = 0;
        double worst = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(
              features[i], result.centroids[static_cast<std::size_t>(result.assignments[i])]);
          if (d > worst) {
            worst = d;
            farthest = i;
          }
        }
        result.centroids[static_cast<std::size_t>(c)] = features[farthest];
      }
    }
  }
  return result;
}

void save_dataset(const MultiModalDataset& data, const std::string& jsonl_path) {
  std::ofstream out(jsonl_path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + jsonl_path);
  for (const auto& r : data.records) {
    nlohmann::json j;
    j["x"] = r.features;
    if (r.label) {
      j["y"] = *r.label;
    } else {
      j["y"] = nullptr;
    }
    j["split"] = to_string(r.split);
    out << j.dump() << '\n';
  }
}

MultiModalDataset load_dataset(const std::string& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + jsonl_path);
  MultiModalDataset data;
  std::string line;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Record r;
    r.features = j.at("x").get<std::vector<std::vector<double>>>();
    if (!j.at("y").is_null()) {
      r.label = j.at("y").get<int>();
      max_label = std::max(max_label, *r.label);
    }
    r.split = split_from_string(j.at("split").get<std::string>());
    data.records.push_back(std::move(r));
  }
  if (data.records.empty()) throw std::runtime_error("load_dataset: no records in " + jsonl_path);
  data.modality_count = static_cast<int>(data.records.front().features.size());
  for (const auto& x : data.records.front().features) {
    data.dims.push_back(static_cast<int>(x.size()));
  }
  data.class_count = max_label + 1;
  data.validate();
  return data;
}

void save_manifest(const std::string& path, const MultiModalDataset& data,
                   const std::string& generator_json, std::uint64_t seed, double label_rate) {
  nlohmann::json j;
  j["modality_count"] = data.modality_count;
  j["class_count"] = data.class_count;
  j["dims"] = data.dims;
  j["record_count"] = data.records.size();
  j["seed"] = seed;
  j["label_rate"] = label_rate;
  j["generator"] = nlohmann::json::parse(generator_json);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
  out << j.dump(2) << '\n';
}

std::string gaussian_spec_to_json(const GaussianModalitySpec& spec) {
  nlohmann::json j;
  j["kind"] = "gaussian";
  j["prior"] = spec.prior.weights();
  nlohmann::json modalities = nlohmann::json::array();
  for (const auto& m : spec.modalities) {
    nlohmann::json jm;
    jm["means"] = m.means;
    jm["variances"] = m.variances;
    modalities.push_back(std::move(jm));
  }
  j["modalities"] = std::move(modalities);
  return j.dump();
}

GaussianModalitySpec gaussian_spec_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GaussianModalitySpec spec;
  spec.prior = SimplexVector(j.at("prior").get<std::vector<double>>());
  for (const auto& jm : j.at("modalities")) {
    GaussianModality m;
    m.means = jm.at("means").get<std::vector<std::vector<double>>>();
    m.variances = jm.at("variances").get<std::vector<std::vector<double>>>();
    spec.modalities.push_back(std::move(m));
  }
  spec.validate();
  return spec;
}

}  // namespace tcgm
