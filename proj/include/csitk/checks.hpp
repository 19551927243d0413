#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace csitk::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckOptions {
  // Fault-injection fixture: corrupts the analytic gradient fed into the
  // grad/mul comparison so the detection path itself can be exercised.
  bool inject_grad_bug = false;
  uint64_t seed = 1;
};

// Fast invariant suite: gradient checks per op, softmax/layer-norm
// properties, mask statistics, and format round trips.
std::vector<CheckResult> run_checks(const CheckOptions& opt = {});

bool all_passed(const std::vector<CheckResult>& results);
nlohmann::json checks_to_json(const std::vector<CheckResult>& results);

}  // namespace csitk::checks
