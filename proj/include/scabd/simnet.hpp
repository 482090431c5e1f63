#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scabd/core.hpp"
#include "scabd/protocol.hpp"

namespace scabd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CrashSpec {
  ProcessId pid = 0;
  Tick at = 0;

  bool operator==(const CrashSpec&) const = default;
};

/// Independent per-message delay drawn uniformly from [min, max].
struct UniformDelay {
  Tick min = 1;
  Tick max = 10;

  bool operator==(const UniformDelay&) const = default;
};

/// Fixed delay per directed link; links not listed use `fallback`.
struct PerLinkDelay {
  Tick fallback = 1;
  std::map<std::pair<ProcessId, ProcessId>, Tick> links;

  bool operator==(const PerLinkDelay&) const = default;
};

/// One line of an adversarial delivery script. Zero in `from`/`to` matches
/// any process. Applies to messages sent in ticks [start, end).
struct AdversarialRule {
  ProcessId from = 0;
  ProcessId to = 0;
  Tick start = 0;
  Tick end = std::numeric_limits<Tick>::max();
  Tick delay = 1;

  bool matches(const Message& m, Tick sent) const;
  bool operator==(const AdversarialRule&) const = default;
};

/// The first matching rule fixes a message's delay; unmatched messages
/// draw from `fallback`.
struct AdversarialSchedule {
  std::vector<AdversarialRule> rules;
  UniformDelay fallback;

  bool operator==(const AdversarialSchedule&) const = default;
};

using DelayModel = std::variant<UniformDelay, PerLinkDelay, AdversarialSchedule>;

struct ScriptedOp {
  ProcessId proc = 0;
  OpKind kind = OpKind::read;
  RegisterId reg;
  Value value = 0;
  Tick not_before = 0;

  bool operator==(const ScriptedOp&) const = default;
};

/// Closed-loop clients. A non-empty `script` replaces random generation.
struct Workload {
  int ops_per_process = 0;
  double read_fraction = 0.5;
  int register_count = 1;
  Tick think_time = 1;
  std::vector<ScriptedOp> script;

  bool operator==(const Workload&) const = default;
};

struct SimConfig {
  int n = 3;
  std::vector<CrashSpec> crashes;
  std::uint64_t seed = 0;
  DelayModel delay = UniformDelay{};
  Workload workload;
  Tick max_ticks = 10'000'000;
  Protocol protocol = Protocol::sc_abd;
  Mutant mutant = Mutant::none;
  bool mid_op_crash = false;

  bool operator==(const SimConfig&) const = default;
};

/// Largest tolerated number of crashes, n - quorum_size(n).
int max_faulty(int n);

/// Throws ConfigError describing the first violated constraint.
void validate_config(const SimConfig& cfg);

std::string register_name(int index);

/// Operations each process will issue, indexed by pid - 1. The first
/// operation of a process carries its start tick in `not_before`.
std::vector<std::vector<ScriptedOp>> generate_workload(const SimConfig& cfg, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Traces

/// One handler execution.
struct StepRecord {
  ProcessId proc = 0;
  Tick rt = 0;
  LogicalTime lt = 0;

  bool operator==(const StepRecord&) const = default;
};

struct Receipt {
  Tick rt = 0;
  /// False when the receiver discarded the message as stale; no handler
  /// ran, so `step` and `lt` are meaningless.
  bool handled = true;
  std::uint64_t step = 0;
  LogicalTime lt = 0;

  bool operator==(const Receipt&) const = default;
};

struct MessageRecord {
  Message msg;
  std::uint64_t send_step = 0;
  Tick send_rt = 0;
  std::optional<Receipt> recv;
  bool dropped = false;  // receiver had crashed

  bool operator==(const MessageRecord&) const = default;
};

struct OpRecord {
  OpId opid = 0;
  ProcessId proc = 0;
  OpKind kind = OpKind::read;
  int rounds = 0;

  bool operator==(const OpRecord&) const = default;
};

struct CrashRecord {
  ProcessId proc = 0;
  Tick requested = 0;
  Tick at = 0;

  bool operator==(const CrashRecord&) const = default;
};

enum class RunOutcome { quiescent, horizon_exhausted };

struct Trace {
  Protocol protocol = Protocol::sc_abd;
  int n = 0;
  History history;
  std::vector<std::uint64_t> event_steps;  // step index of each history event
  std::vector<StepRecord> steps;
  std::vector<MessageRecord> messages;
  std::vector<OpRecord> ops;  // completed operations, by completion order
  std::vector<CrashRecord> crashes;
  RunOutcome outcome = RunOutcome::quiescent;
  Tick end_tick = 0;

  bool crashed(ProcessId p) const;
  bool operator==(const Trace&) const = default;
};

/// Runs the configured workload to quiescence or to max_ticks. Deterministic
/// in `cfg`. Throws ConfigError for invalid configurations.
Trace run_simulation(const SimConfig& cfg);

}  // namespace scabd
