#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "app/config.hpp"

namespace jumpns::app {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfigError = 2, kNumericalFailure = 3, kVerifyFailure = 4 };

struct GlobalOptions {
  std::string config;  // empty = defaults (verify only)
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
  /// verify only: overrides experiment.suite / experiment.tolerance_scale.
  std::optional<std::string> suite;
  std::optional<double> tolerance_scale;
};

struct CommandResult {
  int exit_code = kOk;
  std::string run_id;
  std::filesystem::path run_dir;
  Json metrics;
};

/// Runs one command. Never throws: errors map to the exit-code contract and
/// are reported on `err`.
CommandResult run_command(const std::string& command, const GlobalOptions& options, std::ostream& out,
                          std::ostream& err);

}  // namespace jumpns::app
