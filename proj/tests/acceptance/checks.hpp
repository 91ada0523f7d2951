#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace dslota::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteOptions {
  bool learning = true;  // criterion 7 dominates the runtime
  std::function<void(const CheckResult&)> on_result;
};

// Runs every acceptance check in order; the last one audits the runs made by
// the earlier ones.
std::vector<CheckResult> run_suite(const SuiteOptions& options = {});

std::string format_line(const CheckResult& r);

}  // namespace dslota::acceptance
