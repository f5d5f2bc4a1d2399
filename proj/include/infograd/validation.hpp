#pragma once

// Named property checks over all library modules, runnable from the CLI.

#include <cstdint>
#include <string>
#include <vector>

namespace infograd {

struct CheckResult {
  std::string name;
  std::vector<std::string> tags;
  double measured = 0.0;
  double threshold = 0.0;  // pass iff measured <= threshold
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  std::string tag;               // empty: every check; otherwise checks carrying this tag
  double tolerance_scale = 1.0;  // multiplies every threshold
  std::uint64_t seed = 0;
};

std::vector<std::string> validation_tags();
std::vector<CheckResult> run_validation_suite(const ValidationOptions& options);

// Machine-readable report (JSON).
std::string validation_report_json(const std::vector<CheckResult>& results, const ValidationOptions& options);

}  // namespace infograd
