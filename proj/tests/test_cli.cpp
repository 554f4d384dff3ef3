#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "app/record.hpp"
#include "app/verify.hpp"

using namespace jumpns;
using namespace jumpns::app;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = JUMPNS_CONFIG_DIR;

struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& name) : root(fs::temp_directory_path() / ("jumpns-test-cli-" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(root / name) << text;
    return root / name;
  }
};

struct Run {
  CommandResult result;
  std::string out;
  std::string err;
};

Run run(const std::string& command, const fs::path& config, const fs::path& out_root) {
  GlobalOptions o;
  o.config = config.string();
  o.out = out_root.string();
  std::ostringstream out, err;
  Run r{run_command(command, o, out, err), "", ""};
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

const std::string kSilentSetup = R"([grid]
n_modes = 8

[noise]
weights = [1.0, 0.5]
sigma = [0.0, 0.0]
base_field = {"kind": "random", "seed": 2, "decay": 1.5, "amplitude": 0.5}

[solver]
dt = 0.01
T = 0.3
eps = 0.2
initial = {"kind": "random", "seed": 1, "decay": 1.5, "amplitude": 1.0}
)";

}  // namespace

TEST_CASE("simulate writes one trajectory row per step plus the initial state") {
  Scratch s("rows");
  const auto r = run("simulate", kConfigs / "simulate_minimal.ini", s.root);
  REQUIRE(r.result.exit_code == kOk);
  // T = 0.5, dt = 0.01: header + 51 rows.
  CHECK(line_count(r.result.run_dir / "traj_000.csv") == 52);
  CHECK(slurp(r.result.run_dir / "traj_000.csv").rfind("t,h,v,da,jumps_this_step,log_weight_running\n", 0) == 0);
  const Json summary = read_json(r.result.run_dir / "summary.json");
  CHECK(summary.at("n_traj") == 2);
  CHECK(summary.at("trajectories").at(1).at("rows") == 51);
  CHECK(fs::exists(r.result.run_dir / "final_001.jnsf"));
  CHECK(fs::exists(r.result.run_dir / "snap_000_step000025.jnsf"));
}

TEST_CASE("a zero time step is a config error naming the field") {
  Scratch s("dt");
  const auto cfg = s.write("bad.ini", "[solver]\ndt = 0\n");
  const auto r = run("simulate", cfg, s.root);
  CHECK(r.result.exit_code == kConfigError);
  CHECK(r.err.find("solver.dt") != std::string::npos);
}

TEST_CASE("unknown keys and sections are config errors") {
  Scratch s("unknown");
  CHECK(run("skeleton", s.write("a.ini", "[solver]\ndtt = 0.1\n"), s.root).err.find("solver.dtt") !=
        std::string::npos);
  CHECK(run("skeleton", s.write("b.ini", "[extra]\nx = 1\n"), s.root).result.exit_code == kConfigError);
  CHECK(run("skeleton", s.write("c.ini", "[grid]\nn_modes = 7\n"), s.root).result.exit_code == kConfigError);
}

TEST_CASE("a missing control file is a config error") {
  Scratch s("control");
  const auto cfg = s.write("c.ini", "[experiment]\ncontrol = no_such_control.json\n");
  const auto r = run("skeleton", cfg, s.root);
  CHECK(r.result.exit_code == kConfigError);
  CHECK(r.err.find("no_such_control.json") != std::string::npos);
}

TEST_CASE("numerical failure exit code when the guard trips") {
  Scratch s("guard");
  const auto cfg = s.write("g.ini", kSilentSetup + "guard = 1e-6\n");
  const auto r = run("simulate", cfg, s.root);
  CHECK(r.result.exit_code == kNumericalFailure);
  CHECK(read_json(r.result.run_dir / "record.json").at("exit_code") == kNumericalFailure);
}

TEST_CASE("the unit-control skeleton CSV equals the silent-noise simulate CSV byte for byte") {
  Scratch s("unit");
  const auto cfg = s.write("u.ini", kSilentSetup + "\n[experiment]\nseed = 9\n");
  const auto sim = run("simulate", cfg, s.root);
  const auto sk = run("skeleton", cfg, s.root);
  REQUIRE(sim.result.exit_code == kOk);
  REQUIRE(sk.result.exit_code == kOk);
  CHECK(slurp(sim.result.run_dir / "traj_000.csv") == slurp(sk.result.run_dir / "skeleton.csv"));
}

TEST_CASE("config echo round-trips through INI and JSON encodings") {
  Scratch s("roundtrip");
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().filename().string());
    const RunConfig a = load_run_config(entry.path());
    const auto json_path = s.write(entry.path().stem().string() + ".json", a.echo().dump(2));
    const RunConfig b = load_run_config(json_path);
    CHECK(a.echo() == b.echo());
    CHECK(run_id("rate", a.echo()) == run_id("rate", b.echo()));
  }
}

TEST_CASE("ini values parse as JSON with a string fallback") {
  const Json j = parse_ini_text("[solver]\nscheme = implicit_euler\ndt = 0.5\n[noise]\nweights = [1, 2]\n");
  CHECK(j.at("solver").at("scheme") == "implicit_euler");
  CHECK(j.at("solver").at("dt") == 0.5);
  CHECK(j.at("noise").at("weights").size() == 2);
  const RunConfig c = parse_run_config(parse_ini_text("[solver]\nscheme = implicit_euler\ndt = 0.5\n"));
  CHECK(c.solver.scheme == StokesScheme::implicit_euler);
}

TEST_CASE("verify selectors filter by module, id and comma lists") {
  const auto checks = list_checks();
  std::size_t spectral = 0, selected = 0;
  for (const auto& c : checks) {
    spectral += selector_matches("spectral", c) ? 1 : 0;
    selected += selector_matches("jump.entropy,spde", c) ? 1 : 0;
    CHECK(selector_matches("all", c));
    CHECK_FALSE(selector_matches("nothing", c));
  }
  CHECK(spectral == 5);
  CHECK(selected == 5);

  Scratch s("selector");
  GlobalOptions o;
  o.out = s.root.string();
  o.quiet = true;
  o.suite = "nothing";
  std::ostringstream out, err;
  CHECK(run_command("verify", o, out, err).exit_code == kConfigError);
}

TEST_CASE("a tampered tolerance makes verify fail with exit code 4") {
  Scratch s("tamper");
  GlobalOptions o;
  o.out = s.root.string();
  o.quiet = true;
  o.suite = "spectral.parseval,jump.entropy";
  std::ostringstream out, err;
  const auto ok = run_command("verify", o, out, err);
  CHECK(ok.exit_code == kOk);
  o.tolerance_scale = 0.0;
  const auto bad = run_command("verify", o, out, err);
  CHECK(bad.exit_code == kVerifyFailure);
  const Json report = read_json(bad.run_dir / "report.json");
  CHECK(report.at("passed") == false);
  CHECK(report.at("checks").size() == 2);
}

TEST_CASE("zero sampling budgets leave the scaling table empty with a warning") {
  Scratch s("budget");
  const auto r = run("rate", kConfigs / "zero_rate.ini", s.root);
  REQUIRE(r.result.exit_code == kOk);
  CHECK(r.out.find("warning: scaling table empty") != std::string::npos);
  CHECK(line_count(r.result.run_dir / "scaling.csv") == 1);
  const Json summary = read_json(r.result.run_dir / "summary.json");
  CHECK(summary.at("rate").at("rate_value") == 0.0);
  CHECK(summary.at("scaling").at("rows").empty());
}

TEST_CASE("reruns give identical run ids and manifests, a new seed a new id") {
  Scratch s("determinism");
  GlobalOptions o;
  o.config = (kConfigs / "mc_small.ini").string();
  o.quiet = true;
  std::ostringstream out, err;
  o.out = (s.root / "a").string();
  const auto a = run_command("mc", o, out, err);
  o.out = (s.root / "b").string();
  const auto b = run_command("mc", o, out, err);
  REQUIRE(a.exit_code == kOk);
  REQUIRE(b.exit_code == kOk);
  CHECK(a.run_id == b.run_id);
  const Json ma = read_json(a.run_dir / "record.json").at("manifest");
  CHECK(ma == read_json(b.run_dir / "record.json").at("manifest"));
  CHECK(ma.size() == 2);
  for (const auto& f : ma) CHECK(f.at("sha256") == sha256_file(a.run_dir / f.at("file").get<std::string>()));
  o.seed = 99;
  CHECK(run_command("mc", o, out, err).run_id != a.run_id);
}

TEST_CASE("output root precedence: --out, then the environment") {
  Scratch s("root");
  const RunConfig c = parse_run_config(Json::object());
  ::setenv(kOutputRootEnv, (s.root / "env").c_str(), 1);
  CHECK(output_root("", c) == s.root / "env");
  CHECK(output_root((s.root / "cli").string(), c) == s.root / "cli");
  ::unsetenv(kOutputRootEnv);
  CHECK(output_root("", c) == fs::path("jumpns_runs"));
}

TEST_CASE("sha256 reference value") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
