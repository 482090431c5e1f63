// Command-line front end: run, check, fuzz and stats subcommands.

#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "scabd/cli.hpp"

int main(int argc, char** argv) {
  using namespace scabd;
  CLI::App app{"SC-ABD simulation and consistency-checking laboratory"};
  app.require_subcommand(1);

  cli::RunOptions run;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Simulate a configured workload and record its history");
  run_cmd->add_option("config", run.config, "Run configuration file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the configured seed");
  run_cmd->add_option("--out", run.out, "History output path (message log goes next to it)")
      ->required();

  cli::CheckOptions check;
  std::string mode = "compositional";
  auto* check_cmd = app.add_subcommand("check", "Check a history file for sequential consistency");
  check_cmd->add_option("history", check.history, "History file (JSON lines)")->required();
  check_cmd->add_option("--mode", mode, "compositional, bruteforce or both")
      ->check(CLI::IsMember({"compositional", "bruteforce", "both"}));
  check_cmd->add_option("--oracle-cap", check.oracle_cap, "Largest history the oracle decides");
  check_cmd->add_option("--state-cap", check.state_cap, "Search budget per register");

  cli::FuzzOptions fuzz;
  std::string mutant = "none";
  fuzz.jobs = std::max(1U, std::thread::hardware_concurrency());
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Run and check a campaign of seeded simulations");
  fuzz_cmd->add_option("--runs", fuzz.runs, "Number of runs");
  fuzz_cmd->add_option("--mutant", mutant, "none, small-quorum or no-writeback")
      ->check(CLI::IsMember({"none", "small-quorum", "no-writeback"}));
  fuzz_cmd->add_option("--seed0", fuzz.seed0, "Seed of the first run; run i uses seed0 + i");
  fuzz_cmd->add_option("--jobs", fuzz.jobs, "Worker threads");

  cli::StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "Report rounds per operation for a recorded run");
  stats_cmd->add_option("history", stats.history, "History file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) {
    if (*seed_opt) run.seed = run_seed;
    return cli::cmd_run(run, std::cout, std::cerr);
  }
  if (*check_cmd) {
    check.mode = mode == "both"         ? cli::CheckMode::both
                 : mode == "bruteforce" ? cli::CheckMode::bruteforce
                                        : cli::CheckMode::compositional;
    return cli::cmd_check(check, std::cout, std::cerr);
  }
  if (*fuzz_cmd) {
    fuzz.mutant = *parse_mutant(mutant);
    return cli::cmd_fuzz(fuzz, std::cout, std::cerr);
  }
  return cli::cmd_stats(stats, std::cout, std::cerr);
}
