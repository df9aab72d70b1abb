#pragma once

// Finite-difference gradient suites shared by `vvnet gradcheck` and the
// acceptance runner.

#include <cstdint>
#include <string>
#include <vector>

#include "vvnet/gradcheck.hpp"

namespace vvnet {

struct SuiteResult {
  std::string name;
  std::uint64_t seed = 0;
  double tol = 0.0;
  CheckReport report;
};

// Layer suites, then "projection", then "model" (tiny VVNetR-120).
std::vector<std::string> layer_suite_names();
std::vector<std::string> all_suite_names();

// Throws InvalidConfig for an unknown name. A positive `tol` replaces the
// suite's own tolerance when judging the report.
SuiteResult run_suite(const std::string& name, std::uint64_t seed, double tol = 0.0);

}  // namespace vvnet
