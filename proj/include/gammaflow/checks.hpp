#pragma once

// Named checks shared by the acceptance binary and `gammaflow verify`: the
// twelve acceptance criteria and a set of quicker per-module properties.
// Every check uses fixed seeds.

#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

namespace gammaflow {

struct CheckResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;  // not part of the JSON report
};

using CheckCallback = std::function<void(const CheckResult&)>;

// Criteria 1 to 12 in order.
std::vector<CheckResult> acceptance_checks(const CheckCallback& on_result = {});
std::vector<CheckResult> property_checks(const CheckCallback& on_result = {});

// {"schema_version": 1, "checks": [...], "passed", "failed", "all_pass"}
nlohmann::json check_report(const std::vector<CheckResult>& results);

}  // namespace gammaflow
