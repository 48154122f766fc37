#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cachebeam {

// Outcome of one acceptance criterion.
struct CheckResult {
  int criterion = 0;
  std::string name;
  bool pass = false;
  std::string detail;   // deterministic (no timing) so reruns compare equal
  double seconds = 0.0;
};

// Runs the acceptance battery. full=true uses the pinned acceptance counts
// (minutes of runtime); full=false runs the same structure at smoke-test
// counts. `only` restricts to the listed criterion numbers (empty = all 1-11).
// `progress`, when given, receives one line per finished criterion.
std::vector<CheckResult> run_acceptance(bool full, std::ostream* progress = nullptr,
                                        const std::vector<int>& only = {});

// "[PASS] criterion 3: robust secrecy guarantee — 0/212 violations (41.0s)"
std::string format_check_line(const CheckResult& r);

}  // namespace cachebeam
