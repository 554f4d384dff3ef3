#include "app/record.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "jumpns/errors.hpp"

namespace jumpns::app {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md.data(), &len) != 1) throw std::runtime_error("sha256 final failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read '" + path.string() + "' for hashing");
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.hex();
}

std::string run_id(const std::string& command, const Json& echo) {
  return sha256_hex(command + "\n" + echo.dump() + "\n" + std::string(kCodeVersion));
}

fs::path output_root(const std::string& cli_out, const RunConfig& config) {
  if (!cli_out.empty()) return cli_out;
  if (!config.output.directory.empty()) {
    const fs::path p(config.output.directory);
    return p.is_absolute() || config.base_dir.empty() ? p : config.base_dir / p;
  }
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "jumpns_runs";
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

RunWriter::RunWriter(const fs::path& root, std::string command, const Json& echo)
    : command_(std::move(command)), echo_(echo), id_(run_id(command_, echo)), started_(utc_now()) {
  dir_ = root / (command_ + "-" + id_.substr(0, 16));
  std::error_code ec;
  // A rerun of the same config replaces the previous run's files.
  if (fs::exists(dir_ / "record.json")) fs::remove_all(dir_, ec);
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

fs::path RunWriter::file(const std::string& name) {
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  return dir_ / name;
}

void RunWriter::write_text(const std::string& name, const std::string& text) {
  std::ofstream os(file(name), std::ios::binary);
  os << text;
  if (!os) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
}

void RunWriter::write_json(const std::string& name, const Json& j) { write_text(name, j.dump(2) + "\n"); }

Json RunWriter::finish(const Json& metrics, int exit_code, const std::string& status) {
  std::vector<std::string> names = files_;
  std::sort(names.begin(), names.end());
  Json manifest = Json::array();
  for (const auto& n : names) {
    const fs::path p = dir_ / n;
    if (!fs::exists(p)) continue;
    manifest.push_back({{"file", n}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
  }
  Json rec;
  rec["run_id"] = id_;
  rec["command"] = command_;
  rec["code_version"] = kCodeVersion;
  rec["started_utc"] = started_;
  rec["finished_utc"] = utc_now();
  rec["status"] = status;
  rec["exit_code"] = exit_code;
  rec["config"] = echo_;
  rec["manifest"] = manifest;
  rec["metrics"] = metrics;
  std::ofstream os(dir_ / "record.json");
  os << rec.dump(2) << "\n";
  return manifest;
}

}  // namespace jumpns::app
