#include "tcgm/joint_table.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "tcgm/rng.hpp"

namespace tcgm {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kLoadRenormTol = 1e-9;

void check_supports(const std::vector<int>& supports, int class_count) {
  if (supports.empty()) throw std::invalid_argument("JointTable: need at least one modality");
  for (int s : supports) {
    if (s < 1) throw std::invalid_argument("JointTable: support sizes must be >= 1");
  }
  if (class_count < 1) throw std::invalid_argument("JointTable: class_count must be >= 1");
}

std::size_t checked_cell_count(const std::vector<int>& supports, int class_count) {
  std::size_t cells = static_cast<std::size_t>(class_count);
  for (int s : supports) {
    cells *= static_cast<std::size_t>(s);
    if (cells > JointTable::kMaxCells) {
      throw std::invalid_argument("JointTable: cell count exceeds the 10^7 cap");
    }
  }
  return cells;
}

}  // namespace

JointTable::JointTable(std::vector<int> modality_supports, int class_count,
                       std::vector<double> probs)
    : supports_(std::move(modality_supports)), class_count_(class_count),
      probs_(std::move(probs)) {
  check_supports(supports_, class_count_);
  const std::size_t cells = checked_cell_count(supports_, class_count_);
  if (probs_.size() != cells) {
    throw std::invalid_argument("JointTable: probs size does not match the axis sizes");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("JointTable: probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTol) {
    throw std::invalid_argument("JointTable: total mass is " + std::to_string(total) +
                                ", expected 1");
  }
  compute_strides();
}

void JointTable::compute_strides() {
  strides_.assign(supports_.size(), 1);
  std::size_t stride = static_cast<std::size_t>(class_count_);
  for (int m = modality_count() - 1; m >= 0; --m) {
    strides_[static_cast<std::size_t>(m)] = stride;
    stride *= static_cast<std::size_t>(supports_[static_cast<std::size_t>(m)]);
  }
}

JointTable JointTable::from_factors(
    const SimplexVector& prior,
    const std::vector<std::vector<std::vector<double>>>& conditionals) {
  if (conditionals.empty()) {
    throw std::invalid_argument("from_factors: need at least one modality");
  }
  const int classes = prior.size();
  std::vector<int> supports;
  supports.reserve(conditionals.size());
  for (const auto& cond : conditionals) {
    if (static_cast<int>(cond.size()) != classes) {
      throw std::invalid_argument("from_factors: conditional must have one row per class");
    }
    const std::size_t support = cond.front().size();
    if (support == 0) throw std::invalid_argument("from_factors: empty modality support");
    for (const auto& row : cond) {
      if (row.size() != support) {
        throw std::invalid_argument("from_factors: ragged conditional rows");
      }
      double total = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) {
          throw std::invalid_argument("from_factors: conditional entries must be >= 0");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > kLoadRenormTol) {
        throw std::invalid_argument("from_factors: conditional rows must sum to 1");
      }
    }
    supports.push_back(static_cast<int>(support));
  }

  const std::size_t cells = checked_cell_count(supports, classes);
  std::vector<double> probs(cells, 0.0);
  const int modalities = static_cast<int>(supports.size());
  std::vector<int> states(static_cast<std::size_t>(modalities), 0);
  std::size_t flat = 0;
  do {
    for (int y = 0; y < classes; ++y) {
      double p = prior[y];
      for (int m = 0; m < modalities; ++m) {
        p *= conditionals[static_cast<std::size_t>(m)][static_cast<std::size_t>(y)]
                         [static_cast<std::size_t>(states[static_cast<std::size_t>(m)])];
      }
      probs[flat++] = p;
    }
  } while (next_state(states, supports));

  // Renormalize away the accumulated rounding so the constructor's exact
  // mass check passes.
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  return JointTable(std::move(supports), classes, std::move(probs));
}

JointTable JointTable::random(const std::vector<int>& supports, int class_count,
                              std::uint64_t seed, double floor) {
  check_supports(supports, class_count);
  if (!(floor > 0.0) || floor >= 1.0) {
    throw std::invalid_argument("JointTable::random: floor must be in (0, 1)");
  }
  const std::size_t cells = checked_cell_count(supports, class_count);
  Rng rng(seed);
  std::vector<double> probs(cells);
  double total = 0.0;
  for (double& p : probs) {
    p = rng.uniform(floor, 1.0);
    total += p;
  }
  for (double& p : probs) p /= total;
  return JointTable(supports, class_count, std::move(probs));
}

JointTable JointTable::random_conditionally_independent(const std::vector<int>& supports,
                                                        int class_count, std::uint64_t seed,
                                                        double floor) {
  check_supports(supports, class_count);
  Rng rng(seed);
  std::vector<double> prior_raw(static_cast<std::size_t>(class_count));
  for (double& p : prior_raw) p = rng.uniform(floor, 1.0);
  const SimplexVector prior = SimplexVector::normalized(std::move(prior_raw));

  std::vector<std::vector<std::vector<double>>> conditionals;
  conditionals.reserve(supports.size());
  for (int support : supports) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(class_count));
    for (auto& row : rows) {
      row.resize(static_cast<std::size_t>(support));
      double total = 0.0;
      for (double& p : row) {
        p = rng.uniform(floor, 1.0);
        total += p;
      }
      for (double& p : row) p /= total;
    }
    conditionals.push_back(std::move(rows));
  }
  return from_factors(prior, conditionals);
}

std::size_t JointTable::flat_index(const std::vector<int>& states, int label) const {
  if (static_cast<int>(states.size()) != modality_count()) {
    throw std::invalid_argument("JointTable: state tuple has wrong arity");
  }
  if (label < 0 || label >= class_count_) {
    throw std::out_of_range("JointTable: label out of range");
  }
  std::size_t flat = static_cast<std::size_t>(label);
  for (int m = 0; m < modality_count(); ++m) {
    const int s = states[static_cast<std::size_t>(m)];
    if (s < 0 || s >= supports_[static_cast<std::size_t>(m)]) {
      throw std::out_of_range("JointTable: modality state out of range");
    }
    flat += static_cast<std::size_t>(s) * strides_[static_cast<std::size_t>(m)];
  }
  return flat;
}

double JointTable::at(const std::vector<int>& states, int label) const {
  return probs_[flat_index(states, label)];
}

JointTable JointTable::marginal(const std::vector<int>& keep_modalities, bool keep_label) const {
  if (keep_modalities.empty()) {
    throw std::invalid_argument("marginal: must keep at least one modality axis");
  }
  for (std::size_t k = 0; k < keep_modalities.size(); ++k) {
    const int axis = keep_modalities[k];
    if (axis < 0 || axis >= modality_count()) {
      throw std::out_of_range("marginal: modality axis out of range");
    }
    if (k > 0 && keep_modalities[k - 1] >= axis) {
      throw std::invalid_argument("marginal: axes must be strictly increasing");
    }
  }

  std::vector<int> out_supports;
  out_supports.reserve(keep_modalities.size());
  for (int axis : keep_modalities) {
    out_supports.push_back(supports_[static_cast<std::size_t>(axis)]);
  }
  const int out_classes = keep_label ? class_count_ : 1;
  const std::size_t out_cells = checked_cell_count(out_supports, out_classes);

  // Output strides aligned with the kept axes.
  std::vector<std::size_t> out_strides(keep_modalities.size());
  std::size_t stride = static_cast<std::size_t>(out_classes);
  for (int k = static_cast<int>(keep_modalities.size()) - 1; k >= 0; --k) {
    out_strides[static_cast<std::size_t>(k)] = stride;
    stride *= static_cast<std::size_t>(out_supports[static_cast<std::size_t>(k)]);
  }

  std::vector<double> out(out_cells, 0.0);
  std::vector<int> states(static_cast<std::size_t>(modality_count()), 0);
  std::size_t flat = 0;
  do {
    std::size_t base = 0;
    for (std::size_t k = 0; k < keep_modalities.size(); ++k) {
      base += static_cast<std::size_t>(
                  states[static_cast<std::size_t>(keep_modalities[k])]) *
              out_strides[k];
    }
    for (int y = 0; y < class_count_; ++y) {
      const std::size_t target = keep_label ? base + static_cast<std::size_t>(y) : base;
      out[target] += probs_[flat++];
    }
  } while (next_state(states, supports_));

  JointTable result;
  result.supports_ = std::move(out_supports);
  result.class_count_ = out_classes;
  result.probs_ = std::move(out);
  result.compute_strides();
  return result;
}

JointTable JointTable::drop_label() const {
  std::vector<int> all(static_cast<std::size_t>(modality_count()));
  for (int m = 0; m < modality_count(); ++m) all[static_cast<std::size_t>(m)] = m;
  return marginal(all, false);
}

JointTable JointTable::label_as_modality() const {
  JointTable result;
  result.supports_ = supports_;
  result.supports_.push_back(class_count_);
  result.class_count_ = 1;
  result.probs_ = probs_;
  result.compute_strides();
  return result;
}

SimplexVector JointTable::class_prior() const {
  std::vector<double> prior(static_cast<std::size_t>(class_count_), 0.0);
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    prior[flat % static_cast<std::size_t>(class_count_)] += probs_[flat];
  }
  return SimplexVector::normalized(std::move(prior));
}

std::vector<double> JointTable::modality_marginal(int m) const {
  if (m < 0 || m >= modality_count()) {
    throw std::out_of_range("modality_marginal: axis out of range");
  }
  std::vector<double> out(static_cast<std::size_t>(supports_[static_cast<std::size_t>(m)]), 0.0);
  const std::size_t stride = strides_[static_cast<std::size_t>(m)];
  const std::size_t size = static_cast<std::size_t>(supports_[static_cast<std::size_t>(m)]);
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    out[(flat / stride) % size] += probs_[flat];
  }
  return out;
}

std::vector<double> JointTable::modality_joint() const {
  const std::size_t classes = static_cast<std::size_t>(class_count_);
  std::vector<double> out(probs_.size() / classes, 0.0);
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    out[flat / classes] += probs_[flat];
  }
  return out;
}

std::vector<SimplexVector> JointTable::modality_posteriors(int m) const {
  if (m < 0 || m >= modality_count()) {
    throw std::out_of_range("modality_posteriors: axis out of range");
  }
  const std::size_t size = static_cast<std::size_t>(supports_[static_cast<std::size_t>(m)]);
  const std::size_t stride = strides_[static_cast<std::size_t>(m)];
  std::vector<std::vector<double>> joint(size,
                                         std::vector<double>(static_cast<std::size_t>(class_count_), 0.0));
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    joint[(flat / stride) % size][flat % static_cast<std::size_t>(class_count_)] += probs_[flat];
  }
  std::vector<SimplexVector> posteriors;
  posteriors.reserve(size);
  for (std::size_t s = 0; s < size; ++s) {
    double mass = 0.0;
    for (double p : joint[s]) mass += p;
    if (!(mass > 0.0)) {
      throw std::domain_error("modality_posteriors: state " + std::to_string(s) +
                              " of modality " + std::to_string(m) + " has zero mass");
    }
    posteriors.push_back(SimplexVector::normalized(std::move(joint[s])));
  }
  return posteriors;
}

SimplexVector JointTable::joint_posterior(const std::vector<int>& states) const {
  const std::size_t base = flat_index(states, 0);
  std::vector<double> slice(probs_.begin() + static_cast<std::ptrdiff_t>(base),
                            probs_.begin() + static_cast<std::ptrdiff_t>(base) + class_count_);
  double mass = 0.0;
  for (double p : slice) mass += p;
  if (!(mass > 0.0)) {
    throw std::domain_error("joint_posterior: the point has zero mass");
  }
  return SimplexVector::normalized(std::move(slice));
}

bool JointTable::next_state(std::vector<int>& states, const std::vector<int>& supports) {
  for (int m = static_cast<int>(states.size()) - 1; m >= 0; --m) {
    if (++states[static_cast<std::size_t>(m)] < supports[static_cast<std::size_t>(m)]) {
      return true;
    }
    states[static_cast<std::size_t>(m)] = 0;
  }
  return false;
}

std::string JointTable::to_json() const {
  nlohmann::json j;
  j["modality_supports"] = supports_;
  j["class_count"] = class_count_;
  j["probs"] = probs_;
  return j.dump();
}

JointTable JointTable::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<int> supports = j.at("modality_supports").get<std::vector<int>>();
  const int classes = j.at("class_count").get<int>();
  check_supports(supports, classes);

  const auto& raw = j.at("probs");
  if (!raw.is_array()) throw std::invalid_argument("JointTable: probs must be an array");
  std::vector<double> probs;
  probs.reserve(raw.size());
  for (const auto& entry : raw) {
    if (entry.is_string()) {
      probs.push_back(std::stod(entry.get<std::string>()));
    } else if (entry.is_number()) {
      probs.push_back(entry.get<double>());
    } else {
      throw std::invalid_argument("JointTable: probs entries must be numbers or decimal strings");
    }
  }

  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("JointTable: probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kLoadRenormTol) {
    throw std::invalid_argument("JointTable: stored mass " + std::to_string(total) +
                                " is out of the renormalization tolerance");
  }
  for (double& p : probs) p /= total;
  return JointTable(std::move(supports), classes, std::move(probs));
}

}  // namespace tcgm
