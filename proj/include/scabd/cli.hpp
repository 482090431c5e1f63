#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scabd/checker.hpp"
#include "scabd/simnet.hpp"

namespace scabd::cli {

/// Process exit codes shared by all subcommands.
enum ExitCode : int {
  kOk = 0,
  kRejected = 1,
  kUndecided = 2,
  kParseError = 3,
  kConfigError = 4,
  kHorizonExhausted = 5,
  kMissingLogicalTime = 6,
  kIoError = 7,
};

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

enum class CheckMode { compositional, bruteforce, both };

struct CheckOptions {
  std::filesystem::path history;
  CheckMode mode = CheckMode::compositional;
  std::size_t oracle_cap = kDefaultOracleOpCap;
  std::uint64_t state_cap = kDefaultStateCap;
};

struct FuzzOptions {
  std::uint64_t runs = 100;
  Mutant mutant = Mutant::none;
  std::uint64_t seed0 = 1;
  unsigned jobs = 1;
};

struct StatsOptions {
  std::filesystem::path history;
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err);
int cmd_fuzz(const FuzzOptions& opts, std::ostream& out, std::ostream& err);
int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err);

/// Randomized configuration for fuzz run `seed`: n in {3,5,7}, random
/// workload, delays and crashes within the f bound. Mutant campaigns use
/// adversarial link schedules.
SimConfig fuzz_config(std::uint64_t seed, Mutant mutant);

struct FuzzRunResult {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::accepted;
  bool clocks_ok = true;
  bool ts_order_ok = true;
  bool terminated = true;  // every op of a correct process completed

  bool violation() const {
    return outcome == Outcome::rejected || !clocks_ok || !ts_order_ok || !terminated;
  }
};

FuzzRunResult fuzz_one(std::uint64_t seed, Mutant mutant);

/// Rounds per completed operation recovered from a history and its message
/// log: the number of distinct request ids the invoking process broadcast
/// between the operation's invocation and response.
std::vector<std::pair<Operation, int>> rounds_from_log(const History& h,
                                                       const std::vector<MessageRecord>& log);

/// "W:1, R:2" style latency row; a kind with mixed round counts lists them
/// joined by '/', a kind with no operations prints '-'.
std::string latency_row(const std::vector<std::pair<OpKind, int>>& rounds);

}  // namespace scabd::cli
