#pragma once

// Run registry: content-addressed run ids, one output directory per run id,
// and record.json with the config echo, timestamps and a SHA-256 manifest of
// every data file. record.json itself is not part of the manifest, so the
// manifest is reproducible while timestamps are not.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "app/config.hpp"

namespace jumpns::app {

/// Bumped whenever solver output changes for a fixed config.
inline constexpr std::string_view kCodeVersion = "jumpns-0.1.0/solver-4";

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "JUMPNS_OUTPUT_ROOT";

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over command, normalized config echo and code version.
std::string run_id(const std::string& command, const Json& echo);

/// --out, else output.directory (relative to the config), else $JUMPNS_OUTPUT_ROOT, else ./jumpns_runs.
std::filesystem::path output_root(const std::string& cli_out, const RunConfig& config);

class RunWriter {
 public:
  RunWriter(const std::filesystem::path& root, std::string command, const Json& echo);

  const std::string& id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }
  /// Path of a data file, registered for the manifest.
  std::filesystem::path file(const std::string& name);
  void write_text(const std::string& name, const std::string& text);
  void write_json(const std::string& name, const Json& j);

  /// Writes record.json and returns the manifest.
  Json finish(const Json& metrics, int exit_code, const std::string& status);

 private:
  std::string command_;
  Json echo_;
  std::string id_;
  std::filesystem::path dir_;
  std::vector<std::string> files_;
  std::string started_;
};

std::string utc_now();

}  // namespace jumpns::app
