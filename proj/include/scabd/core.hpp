#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace scabd {

/// Process identifiers range over 1..n. Zero is reserved for the initial
/// timestamp ((0,0), 0) and never names a live process.
using ProcessId = std::int32_t;
using LogicalTime = std::uint64_t;
using RequestId = std::uint64_t;
using OpId = std::uint64_t;
using Tick = std::uint64_t;
using Value = std::int64_t;
using RegisterId = std::string;

/// Lamport time paired with the writer's id. Ordered lexicographically,
/// logical time first.
struct Timestamp {
  LogicalTime lt = 0;
  ProcessId pid = 0;

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
  friend constexpr bool operator==(const Timestamp&, const Timestamp&) = default;
};

inline constexpr Timestamp kInitialTimestamp{0, 0};

/// A register value tagged with the timestamp of the write that produced it.
/// Pairs are ordered by timestamp only; equality is structural.
struct TimestampValuePair {
  Timestamp ts;
  Value val = 0;

  friend constexpr std::strong_ordering operator<=>(const TimestampValuePair& a,
                                                    const TimestampValuePair& b) {
    return a.ts <=> b.ts;
  }
  friend constexpr bool operator==(const TimestampValuePair& a, const TimestampValuePair& b) {
    return a.ts == b.ts && a.val == b.val;
  }
};

inline constexpr TimestampValuePair kInitialPair{kInitialTimestamp, 0};

std::strong_ordering compare_timestamps(const Timestamp& a, const Timestamp& b);

constexpr LogicalTime clock_local_step(LogicalTime lt) { return lt + 1; }

constexpr LogicalTime clock_merge(LogicalTime lt, LogicalTime lt_msg) {
  return (lt > lt_msg ? lt : lt_msg) + 1;
}

/// Majority quorum size floor(n/2)+1. Throws std::invalid_argument for n < 1.
int quorum_size(int n);

// ---------------------------------------------------------------------------
// Messages

struct Query {
  LogicalTime lt = 0;
  RequestId rid = 0;
  RegisterId reg;

  bool operator==(const Query&) const = default;
};

struct Response {
  LogicalTime lt = 0;
  RequestId rid = 0;
  TimestampValuePair tsv;

  bool operator==(const Response&) const = default;
};

struct Update {
  LogicalTime lt = 0;
  RequestId rid = 0;
  RegisterId reg;
  TimestampValuePair tsv;

  bool operator==(const Update&) const = default;
};

struct Ack {
  LogicalTime lt = 0;
  RequestId rid = 0;

  bool operator==(const Ack&) const = default;
};

using MessageBody = std::variant<Query, Response, Update, Ack>;

struct Message {
  ProcessId sender = 0;
  ProcessId receiver = 0;
  MessageBody body;

  LogicalTime lt() const;
  RequestId rid() const;
  /// "query", "response", "update" or "ack".
  std::string_view type_name() const;
  /// Query and Update are requests; Response and Ack answer them.
  bool is_request() const;

  bool operator==(const Message&) const = default;
};

// ---------------------------------------------------------------------------
// Histories

enum class EventKind { invocation, response };
enum class OpKind { read, write };

std::string_view to_string(EventKind k);
std::string_view to_string(OpKind k);

/// One invocation or response event. Operation payload fields are repeated on
/// both events of an operation so each event is self-describing on disk.
struct Event {
  EventKind kind = EventKind::invocation;
  OpId opid = 0;
  ProcessId proc = 0;
  OpKind op = OpKind::read;
  RegisterId reg;
  std::optional<Value> val;  // write argument
  std::optional<Value> ret;  // read result; a write's response means OK
  Tick rt = 0;
  std::optional<LogicalTime> lt;
  std::optional<Timestamp> ts;  // update-phase timestamp, when known

  bool operator==(const Event&) const = default;
};

using History = std::vector<Event>;

class HistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation-level view of a history: one entry per invocation, indices point
/// back into the source history.
struct Operation {
  OpId opid = 0;
  ProcessId proc = 0;
  OpKind kind = OpKind::read;
  RegisterId reg;
  std::optional<Value> arg;
  std::optional<Value> ret;
  std::optional<Timestamp> ts;
  std::size_t inv_index = 0;
  std::optional<std::size_t> res_index;

  bool complete() const { return res_index.has_value(); }
};

/// Checks per-process sequentiality and opid pairing. With require_complete,
/// pending operations are an error too. Throws HistoryError.
void validate_history(const History& h, bool require_complete = true);

/// Operations in invocation order. Throws HistoryError on malformed input.
std::vector<Operation> collect_operations(const History& h);

History project_process(const History& h, ProcessId p);
History project_register(const History& h, const RegisterId& x);

/// Per-process projections equal, comparing events by (opid, kind).
bool histories_equivalent(const History& a, const History& b);

/// Distinct process ids in first-appearance order.
std::vector<ProcessId> processes_of(const History& h);
std::vector<RegisterId> registers_of(const History& h);

}  // namespace scabd
