// Acceptance runner: one criterion per invocation (or all with no argument).
// Prints one PASS/FAIL line per criterion plus the underlying checks.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "mediate/validation.hpp"

namespace v = mediate::validation;

namespace {

struct Criterion {
  int id;
  const char* title;
  std::function<v::SuiteResult()> run;
};

std::vector<Criterion> criteria() {
  return {
      {1, "decomposition identity on 50 simulated datasets", [] { return v::identity_suite(50, 5000, 101); }},
      {2, "published percent-change rows are additive", [] { return v::additivity_suite(); }},
      {3, "consistency on 20 random specs at N=1e6", [] { return v::consistency_suite(20, 1'000'000, 103); }},
      {4, "Delta-method SEs and 95% CI coverage, 500 reps at N=1e4",
       [] { return v::sampling_suite(500, 10'000, 104); }},
      {5, "counterfactual oracle matches closed form", [] { return v::oracle_suite(10, 200'000, 105); }},
      {6, "GMM equals per-equation least squares", [] { return v::exact_identification_suite(20, 20'000, 106); }},
      {7, "GACME(1) p-values calibrated under no treatment pathways",
       [] { return v::null_calibration_suite(500, 10'000, 107, 19); }},
      {8, "residual means are zero within arm and mediator quartile", [] { return v::residual_suite(1'000'000, 108); }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  bool all_passed = true;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    v::SuiteResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.name = "criterion " + std::to_string(c.id);
      r.checks.push_back({"suite ran to completion", false, e.what(), "no error"});
    }
    v::print_suite(stdout, r);
    std::printf("CRITERION %d %s: %s (%.2f s)\n", c.id, r.passed() ? "PASS" : "FAIL", c.title, r.seconds);
    std::fflush(stdout);
    all_passed = all_passed && r.passed();
  }
  return all_passed ? EXIT_SUCCESS : EXIT_FAILURE;
}
