#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tcgm {

inline constexpr double kSimplexSumTol = 1e-12;

// Probability vector over the class set. Classifier outputs, class priors
// and aggregator results all use this type; entries are nonnegative and sum
// to one within kSimplexSumTol. Immutable after construction.
class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> weights) : weights_(std::move(weights)) {
    validate();
  }

  static SimplexVector uniform(int n) {
    if (n < 1) throw std::invalid_argument("SimplexVector::uniform: n must be >= 1");
    return trusted(std::vector<double>(static_cast<std::size_t>(n), 1.0 / n));
  }

  // Divide by the sum; the raw entries must be nonnegative with positive total.
  static SimplexVector normalized(std::vector<double> raw) {
    double total = 0.0;
    for (double w : raw) {
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("SimplexVector::normalized: entries must be finite and >= 0");
      }
      total += w;
    }
    if (!(total > 0.0)) {
      throw std::invalid_argument("SimplexVector::normalized: total mass must be positive");
    }
    for (double& w : raw) w /= total;
    return trusted(std::move(raw));
  }

  // Skips validation; for internal call sites that construct exact simplexes.
  static SimplexVector trusted(std::vector<double> weights) {
    SimplexVector v;
    v.weights_ = std::move(weights);
    return v;
  }

  int size() const { return static_cast<int>(weights_.size()); }
  double operator[](int c) const { return weights_[static_cast<std::size_t>(c)]; }
  const std::vector<double>& weights() const { return weights_; }

  bool strictly_positive() const {
    for (double w : weights_) {
      if (!(w > 0.0)) return false;
    }
    return true;
  }

  int argmax() const {
    int best = 0;
    for (int c = 1; c < size(); ++c) {
      if (weights_[static_cast<std::size_t>(c)] > weights_[static_cast<std::size_t>(best)]) {
        best = c;  // ties keep the lowest class id
      }
    }
    return best;
  }

  void validate() const {
    if (weights_.empty()) throw std::invalid_argument("SimplexVector: empty");
    double total = 0.0;
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("SimplexVector: entries must be finite and >= 0");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > kSimplexSumTol) {
      throw std::invalid_argument("SimplexVector: weights sum to " + std::to_string(total) +
                                  ", expected 1");
    }
  }

 private:
  SimplexVector() = default;
  std::vector<double> weights_;
};

}  // namespace tcgm
