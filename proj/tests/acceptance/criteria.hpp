#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace rilab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
  double budget = 0;  // seconds
};

// Runs the selected criteria (all when `only` is empty), printing one
// PASS/FAIL line per criterion to `out` as it finishes.
std::vector<CriterionResult> run(const std::set<int>& only, std::ostream& out);

int criterion_count();

}  // namespace rilab::acceptance
