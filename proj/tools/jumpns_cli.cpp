// jumpns: command-line front end. See README.md for the config schema.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "app/commands.hpp"
#include "app/verify.hpp"

int main(int argc, char** argv) {
  using namespace jumpns::app;

  CLI::App app{"Small-noise jump-driven 2-D Navier-Stokes: simulation, skeleton, rate estimates"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string suite;
  double tolerance_scale = 1.0;
  bool list = false;

  app.add_option("--config", opts.config, "INI or JSON run config")->check(CLI::ExistingFile);
  app.add_option("--out", opts.out, "output root (default: $JUMPNS_OUTPUT_ROOT, else ./jumpns_runs)");
  auto* seed_opt = app.add_option("--seed", seed, "override experiment.seed");
  auto* threads_opt = app.add_option("--threads", threads, "OpenMP thread count")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opts.quiet, "suppress progress output");

  app.add_subcommand("simulate", "integrate the stochastic equation for an ensemble");
  app.add_subcommand("skeleton", "solve the controlled deterministic equation");
  app.add_subcommand("rate", "minimize the entropy cost of reaching an event");
  app.add_subcommand("mc", "plain and importance-sampled event probabilities");
  auto* verify = app.add_subcommand("verify", "run the invariant checks");
  auto* suite_opt = verify->add_option("--suite", suite, "module name, check id, comma list or 'all'");
  auto* tol_opt = verify->add_option("--tolerance-scale", tolerance_scale, "multiply every tolerance");
  verify->add_flag("--list", list, "print the check ids and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  if (list) {
    for (const auto& c : list_checks()) std::cout << c.id << "  " << c.description << '\n';
    return kOk;
  }
  if (seed_opt->count()) opts.seed = seed;
  if (threads_opt->count()) opts.threads = threads;
  if (suite_opt->count()) opts.suite = suite;
  if (tol_opt->count()) opts.tolerance_scale = tolerance_scale;

  const std::string command = app.get_subcommands().front()->get_name();
  const CommandResult r = run_command(command, opts, std::cout, std::cerr);
  return r.exit_code;
}
