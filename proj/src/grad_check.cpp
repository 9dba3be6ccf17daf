#include "tcgm/grad_check.hpp"

#include <cmath>
#include <string>

namespace tcgm {

GradCheckResult finite_difference_check(
    std::vector<ClassifierNet> nets,
    const std::function<double(const std::vector<ClassifierNet>&)>& loss,
    const std::vector<NetGradients>& analytic, double step) {
  GradCheckResult result;

  const auto check_param = [&](double& theta, double analytic_grad, const std::string& where) {
    const double original = theta;
    theta = original + step;
    const double up = loss(nets);
    theta = original - step;
    const double down = loss(nets);
    theta = original;
    const double fd = (up - down) / (2.0 * step);
    const double err =
        std::abs(analytic_grad - fd) / std::max({1.0, std::abs(analytic_grad), std::abs(fd)});
    ++result.checked;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_location = where;
    }
  };

  for (std::size_t n = 0; n < nets.size(); ++n) {
    ClassifierNet& net = nets[n];
    const NetGradients& g = analytic[n];
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (std::size_t o = 0; o < net.weights[l].size(); ++o) {
        for (std::size_t k = 0; k < net.weights[l][o].size(); ++k) {
          check_param(net.weights[l][o][k], g.weights[l][o][k],
                      "net" + std::to_string(n) + " layer" + std::to_string(l) + " w[" +
                          std::to_string(o) + "][" + std::to_string(k) + "]");
        }
      }
      for (std::size_t o = 0; o < net.biases[l].size(); ++o) {
        check_param(net.biases[l][o], g.biases[l][o],
                    "net" + std::to_string(n) + " layer" + std::to_string(l) + " b[" +
                        std::to_string(o) + "]");
      }
    }
  }
  return result;
}

GradCheckResult finite_difference_check(
    const ClassifierNet& net, const std::function<double(const ClassifierNet&)>& loss,
    const NetGradients& analytic, double step) {
  return finite_difference_check(
      std::vector<ClassifierNet>{net},
      [&loss](const std::vector<ClassifierNet>& nets) { return loss(nets.front()); },
      std::vector<NetGradients>{analytic}, step);
}

}  // namespace tcgm
