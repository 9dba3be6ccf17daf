// Central finite-difference verification of analytic gradients.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tcgm/net.hpp"

namespace tcgm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_location;  // "net2 layer1 w[3][0]" style
  std::size_t checked = 0;

  bool pass(double tol = 1e-5) const { return max_rel_error < tol; }
};

// Compares `analytic` against (L(theta+h) - L(theta-h)) / 2h for every
// parameter of every net. The error is |a - f| / max(1, |a|, |f|), so tiny
// gradients are held to an absolute 1e-5 rather than blowing up the ratio.
GradCheckResult finite_difference_check(
    std::vector<ClassifierNet> nets,
    const std::function<double(const std::vector<ClassifierNet>&)>& loss,
    const std::vector<NetGradients>& analytic, double step = 1e-6);

GradCheckResult finite_difference_check(
    const ClassifierNet& net, const std::function<double(const ClassifierNet&)>& loss,
    const NetGradients& analytic, double step = 1e-6);

}  // namespace tcgm
