#include <cstdio>
#include <cstdlib>
#include <string>

#include "horolab/acceptance.hpp"

// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: horolab_acceptance [jobs]
int main(int argc, char** argv) {
  const int jobs = argc > 1 ? std::max(1, std::atoi(argv[1])) : 4;
  bool all = true;
  horolab::run_acceptance(jobs, [&](const horolab::CriterionResult& r) {
    std::printf("%s\n", horolab::format_result(r).c_str());
    std::fflush(stdout);
    all = all && r.pass;
  });
  return all ? 0 : 1;
}
