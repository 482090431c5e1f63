#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scabd/core.hpp"
#include "scabd/simnet.hpp"

namespace scabd {

enum class Outcome { accepted, rejected, undecided };

std::string_view to_string(Outcome o);

struct Violation {
  RegisterId reg;  // empty when the violation spans registers
  std::string condition;
  std::optional<std::pair<OpId, OpId>> ops;  // conflicting pair, earlier first
};

struct RegisterVerdict {
  RegisterId reg;
  Outcome outcome = Outcome::accepted;
  bool fast_path = false;  // accepted via the timestamp witness, no search
  std::uint64_t explored_states = 0;
  std::optional<Violation> violation;
};

struct Verdict {
  Outcome outcome = Outcome::accepted;
  std::optional<History> witness;
  std::optional<Violation> violation;
  std::uint64_t explored_states = 0;
  std::vector<RegisterVerdict> registers;  // compositional checks only
  std::string note;

  bool accepted() const { return outcome == Outcome::accepted; }
};

inline constexpr std::uint64_t kDefaultStateCap = 10'000'000;
inline constexpr std::size_t kDefaultOracleOpCap = 10;

/// Events re-sorted by (lt, process id, position within the process).
/// Throws HistoryError when an event lacks a logical time or when the sort
/// would reorder events of one process.
History build_logical_time_history(const History& h);

/// True when every invocation is immediately followed by its response.
bool is_sequential(const History& s);

/// Every read returns the value of the closest preceding write to its
/// register, or 0. Throws HistoryError for non-sequential input.
bool is_legal_sequential(const History& s);

/// First pair (o1, o2) with o1 preceding o2 in `h` but o2 before o1 in the
/// sequential history `s`. Both must contain the same complete operations.
std::optional<std::pair<OpId, OpId>> find_precedence_violation(const History& h,
                                                               const History& s);

/// Exhaustive linearizability search over the event order of `h`
/// (Wing & Gong with memoized (linearized set, register values) states).
/// Works for any number of registers.
Verdict check_linearizable(const History& h, std::uint64_t max_states = kDefaultStateCap);

using TimestampMap = std::map<OpId, Timestamp>;

/// Orders writes by timestamp and slots each read right after the write whose
/// timestamp it carries; reads of the initial timestamp go first, reads sharing
/// a timestamp are ordered by invocation logical time then process id.
/// Throws HistoryError when a timestamp is missing or a read's timestamp names
/// no write.
History construct_timestamp_witness(const History& hx, const TimestampMap& ts);
History construct_timestamp_witness(const History& hx);

/// Checks LIN of every register subhistory of the logical-time history and
/// composes the per-register witnesses into one certified SC witness.
Verdict check_sc_compositional(const History& h, std::uint64_t max_states = kDefaultStateCap);

/// Exact SC decision by enumerating interleavings of process subhistories.
/// Histories with more than `max_ops` operations are refused (undecided).
Verdict check_sc_bruteforce(const History& h, std::size_t max_ops = kDefaultOracleOpCap);

/// Lamport clock condition over the trace: strictly increasing along each
/// process's handler executions and across every handled send/receive pair.
bool audit_logical_clocks(const Trace& t);

/// For every register x and operations o1 <_{H^lt|x} o2 where o2 is a read,
/// ts(o1) <= ts(o2). Reads are treated as having an update phase, as in the
/// unmutated protocol. Pending operations are ignored.
bool audit_proposition1(const History& h);
bool audit_proposition1(const Trace& t);

/// Drops pending reads and completes pending writes with response events
/// appended after every existing event.
History complete_pending(const History& h);

bool has_pending(const History& h);

}  // namespace scabd
