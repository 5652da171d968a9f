#pragma once
#include <string>
#include <vector>

#include "qf/config.hpp"

namespace qf {

/// Outcome of one numeric acceptance check inside a run.  `passed` means
/// value <= bound.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

struct RunResult {
  std::vector<CheckResult> checks;
  std::vector<std::string> files;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

/// Executes a validated config: runs its preset (or the inline model),
/// writes CSV tables plus summary.json under cfg.out_dir, and returns the
/// check outcomes.  Outputs are a pure function of (config, seed): no
/// timestamps, fixed column orders, 17-digit numeric formatting.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace qf
