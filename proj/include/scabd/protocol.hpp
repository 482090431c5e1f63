#pragma once

#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "scabd/core.hpp"

namespace scabd {

enum class Protocol { sc_abd, mw_abd };

/// Deliberately broken variants used to show that the checker catches bugs.
enum class Mutant {
  none,
  small_quorum,  // waits for floor(n/2) replies instead of floor(n/2)+1
  no_writeback,  // a read returns after its query phase
};

std::string_view to_string(Protocol p);
std::string_view to_string(Mutant m);
std::optional<Protocol> parse_protocol(std::string_view s);
std::optional<Mutant> parse_mutant(std::string_view s);

enum class Phase { idle, querying, updating };

/// Emitted when an operation's final quorum is reached.
struct Completion {
  OpId opid = 0;
  OpKind kind = OpKind::read;
  std::optional<Value> ret;  // empty for writes (OK)
  Timestamp ts;              // timestamp installed by the update phase
  int rounds = 0;            // request/response rounds the operation used

  bool operator==(const Completion&) const = default;
};

struct InvokeRead {
  RegisterId reg;
  OpId opid = 0;
};

struct InvokeWrite {
  RegisterId reg;
  Value value = 0;
  OpId opid = 0;
};

using Stimulus = std::variant<InvokeRead, InvokeWrite, Message>;

template <class State>
struct BasicStepOutput {
  State state;
  std::vector<Message> outbox;
  std::optional<Completion> completion;

  bool operator==(const BasicStepOutput&) const = default;
};

/// Local variables of one SC-ABD process.
struct ReplicaState {
  ProcessId self = 1;
  int n = 1;
  Mutant mutant = Mutant::none;

  LogicalTime lt = 0;
  RequestId rid = 0;
  std::map<RegisterId, TimestampValuePair> tvps;  // absent key means kInitialPair
  std::set<std::pair<TimestampValuePair, ProcessId>> responses;
  std::set<ProcessId> acks;
  bool reading = false;
  RegisterId rreg;
  Value rval = 0;
  Phase phase = Phase::idle;

  // Instrumentation carried for history recording.
  std::optional<OpId> opid;
  TimestampValuePair tsv;
  int rounds = 0;

  const TimestampValuePair& stored(const RegisterId& r) const;
  int quorum() const;
  bool operator==(const ReplicaState&) const = default;
};

using StepOutput = BasicStepOutput<ReplicaState>;

ReplicaState make_replica(ProcessId self, int n, Mutant mutant = Mutant::none);

// Each handler takes the state by value and returns the successor; callers
// that no longer need the old state should move it in.
StepOutput invoke_read(ReplicaState s, const RegisterId& r, OpId opid);
StepOutput invoke_write(ReplicaState s, const RegisterId& r, Value v, OpId opid);
StepOutput handle_query(ReplicaState s, const Query& m, ProcessId from);
StepOutput handle_response(ReplicaState s, const Response& m, ProcessId from);
StepOutput handle_update(ReplicaState s, const Update& m, ProcessId from);
StepOutput handle_ack(ReplicaState s, const Ack& m, ProcessId from);

/// Dispatches a stimulus to the matching handler above.
StepOutput step(ReplicaState s, const Stimulus& stimulus);

/// Multi-writer ABD. Timestamps are (sequence number, pid); both reads and
/// writes run a query phase followed by an update phase. A Lamport clock is
/// still maintained so its histories carry the same annotations as SC-ABD.
struct MwAbdState {
  ProcessId self = 1;
  int n = 1;

  LogicalTime lt = 0;
  RequestId rid = 0;
  std::map<RegisterId, TimestampValuePair> tvps;
  std::set<std::pair<TimestampValuePair, ProcessId>> responses;
  std::set<ProcessId> acks;
  OpKind kind = OpKind::read;
  RegisterId reg;
  Value wval = 0;
  Value rval = 0;
  Phase phase = Phase::idle;

  std::optional<OpId> opid;
  TimestampValuePair tsv;
  int rounds = 0;

  const TimestampValuePair& stored(const RegisterId& r) const;
  int quorum() const;
  bool operator==(const MwAbdState&) const = default;
};

using MwAbdStepOutput = BasicStepOutput<MwAbdState>;

MwAbdState make_mwabd_replica(ProcessId self, int n);
MwAbdStepOutput mwabd_step(MwAbdState s, const Stimulus& stimulus);

}  // namespace scabd
