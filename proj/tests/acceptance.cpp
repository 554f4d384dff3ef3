// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-11 run the
// corresponding verify check and hold it to its runtime budget; criterion 12
// runs the installed CLI twice per command and compares output hashes.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <unistd.h>

#include "app/verify.hpp"

namespace fs = std::filesystem;
using jumpns::app::CheckResult;
using jumpns::app::Json;

namespace {

struct Criterion {
  int number;
  const char* check;
  double seconds;  // <= 0: no runtime budget
  const char* title;
};

const std::vector<Criterion> kCriteria{
    {1, "spectral.bilinear_identities", 10, "bilinear identities at n = 32"},
    {2, "spectral.ladyzhenskaya", 10, "Ladyzhenskaya inequality, constant 2"},
    {3, "spectral.bilinear_oracle", 5, "bilinear form vs direct convolution at n = 8"},
    {4, "spde.single_mode_decay", 30, "single-mode exact decay"},
    {5, "jump.prm_law", 10, "thinned PRM counts are Poisson"},
    {6, "jump.girsanov_mean", 60, "Girsanov weight has mean one"},
    {7, "jump.entropy", 0, "entropy functional reference values"},
    {8, "skeleton.continuity", 120, "skeleton continuity probe"},
    {9, "ldp.planted", 300, "planted rate bound"},
    {10, "ldp.scaling", 600, "-eps log p against the variational rate"},
    {11, "ldp.apriori", 300, "ensemble a-priori functional bounded in eps"},
};

bool report(int number, const char* title, bool passed, const std::string& detail) {
  std::cout << (passed ? "PASS" : "FAIL") << " criterion " << number << ": " << title << " -- " << detail
            << std::endl;
  return passed;
}

Json manifest(const fs::path& root) {
  for (const auto& e : fs::directory_iterator(root)) {
    if (!fs::exists(e.path() / "record.json")) continue;
    std::ifstream is(e.path() / "record.json");
    return Json::parse(is).at("manifest");
  }
  return nullptr;
}

bool cli_determinism(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / ("jumpns-acceptance-" + std::to_string(::getpid()));
  const fs::path configs = JUMPNS_CONFIG_DIR;
  const std::vector<std::pair<std::string, std::string>> runs{{"simulate", "simulate_minimal.ini"},
                                                               {"skeleton", "skeleton_unit.ini"},
                                                               {"rate", "zero_rate.ini"},
                                                               {"mc", "mc_small.ini"},
                                                               {"verify", "verify_small.ini"}};
  bool ok = true;
  for (const auto& [cmd, cfg] : runs) {
    Json m[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / (cmd + std::to_string(k));
      const std::string line = std::string("\"") + JUMPNS_CLI_PATH + "\" --quiet --config \"" +
                               (configs / cfg).string() + "\" --out \"" + out.string() + "\" " + cmd +
                               " > /dev/null 2>&1";
      const int rc = std::system(line.c_str());
      if (rc != 0) {
        ok = false;
        detail += cmd + " exited nonzero; ";
        break;
      }
      m[k] = manifest(out);
    }
    if (m[0].is_null() || m[0] != m[1] || m[0].empty()) {
      ok = false;
      detail += cmd + " hashes differ; ";
    } else {
      detail += cmd + " " + std::to_string(m[0].size()) + " files identical; ";
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return ok;
}

}  // namespace

int main() {
  jumpns::app::VerifyOptions opts;
  opts.benchmark_dir = JUMPNS_CONFIG_DIR;
  int failed = 0;
  for (const auto& c : kCriteria) {
    const CheckResult r = jumpns::app::run_check(c.check, opts);
    const bool in_time = c.seconds <= 0 || r.seconds < c.seconds;
    char buf[256];
    std::snprintf(buf, sizeof buf, "value %.6g, limit %.6g, %.2f s", r.value, r.limit, r.seconds);
    std::string detail = buf;
    if (c.seconds > 0) detail += " (budget " + std::to_string(static_cast<int>(c.seconds)) + " s)";
    if (!r.passed) detail += "; " + r.detail;
    if (!report(c.number, c.title, r.passed && in_time, detail)) ++failed;
  }
  std::string detail;
  if (!report(12, "determinism of every command", cli_determinism(detail), detail)) ++failed;
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all 12 criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
