// Self-contained identity checks over seeded random tables: the dual-route
// total correlation computation, conditional independence of factored
// tables, the posterior form of the joint-marginal ratio, dual-bound
// dominance and tightness, and the expected-gain maximum. The CLI `verify`
// command runs these and reports per-check maximum errors.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tcgm {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  long cases = 0;
  bool pass = false;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  bool perturb = false;             // adds the random-perturbation dominance checks
  std::vector<std::string> only;    // run checks whose name starts with any entry
};

std::vector<CheckResult> run_verification(const VerifyOptions& options);

std::string verify_report_json(const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace tcgm
