#pragma once

// The ten acceptance criteria as library calls, shared by the test binary and
// the verify subcommand. Tolerances are fixed here; tolerance_scale multiplies
// the numerical ones (runtime limits are not scaled).

#include <functional>
#include <string>
#include <vector>

namespace nct {

struct CriterionResult {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

inline constexpr int kCriterionCount = 10;

CriterionResult run_criterion(int id, double tolerance_scale = 1.0);

std::vector<CriterionResult> run_acceptance(double tolerance_scale = 1.0,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// "ok 3 - name: detail" or "not ok 3 - ..."
std::string tap_line(const CriterionResult& r);

}  // namespace nct
