#include <cstdio>

#include "gammaflow/checks.hpp"

int main() {
  using gammaflow::CheckResult;
  int failed = 0;
  auto print = [&](const CheckResult& r) {
    std::printf("%s %-4s %-52s %8.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  };
  const auto results = gammaflow::property_checks(print);
  std::printf("%d/%zu properties pass\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
