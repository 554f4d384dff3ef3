#pragma once

// The verify suite: every invariant of the library as a named check with a
// fixed seed. Checks are selected by module ("spectral", "jump", "spde",
// "skeleton", "ldp", "cli"), by full id, or "all"; selectors may be
// comma-separated. Every tolerance is multiplied by tolerance_scale.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "app/config.hpp"

namespace jumpns::app {

struct VerifyOptions {
  std::string suite = "all";
  double tolerance_scale = 1.0;
  std::uint64_t seed = 1;
  /// Directory holding the frozen benchmark configs; empty = the in-repo configs/.
  std::filesystem::path benchmark_dir;
};

struct CheckResult {
  std::string id;
  std::string module;
  std::string description;
  bool passed = false;
  /// Measured quantity and the limit it was held to.
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
  double seconds = 0.0;
  Json data;

  /// Timing is left out so reports hash identically across reruns.
  Json to_json() const;
};

struct CheckInfo {
  std::string id;
  std::string module;
  std::string description;
};

std::vector<CheckInfo> list_checks();
bool selector_matches(const std::string& suite, const CheckInfo& check);
CheckResult run_check(const std::string& id, const VerifyOptions& options);
std::vector<CheckResult> run_verify(const VerifyOptions& options, std::ostream* progress);

std::filesystem::path default_benchmark_dir();

}  // namespace jumpns::app
