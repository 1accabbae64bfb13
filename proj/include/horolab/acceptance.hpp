#pragma once

#include <functional>
#include <string>
#include <vector>

namespace horolab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured values behind the verdict
  double seconds = 0.0;
};

// Time budgets of the suite, in seconds.
inline constexpr double kHyperbolicSuiteBudget = 30.0;
inline constexpr double kSuiteBudget = 300.0;

// Earliest Heisenberg(b=1) conjugate time over the seeded 20-direction grid (T = 15,
// dt = 0.05), pinned from the first run; the regression check allows 1e-6.
inline constexpr double kHeisenbergFirstConjugateTime = 6.5144559837;

// Runs criteria 1-9 and the end-to-end criterion 10 (all of 1-9 pass within the suite
// budget). `on_result` is called as each criterion finishes. Exceptions inside a criterion
// are reported as a failure of that criterion with the error text.
std::vector<CriterionResult> run_acceptance(
    int jobs = 1, const std::function<void(const CriterionResult&)>& on_result = {});

// "criterion <id>: PASS|FAIL <name> - <detail> (<seconds> s)"
std::string format_result(const CriterionResult& result);

}  // namespace horolab
