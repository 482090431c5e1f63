#include "scabd/protocol.hpp"

#include <algorithm>
#include <stdexcept>

namespace scabd {

std::string_view to_string(Protocol p) { return p == Protocol::sc_abd ? "sc_abd" : "mw_abd"; }

std::string_view to_string(Mutant m) {
  switch (m) {
    case Mutant::none: return "none";
    case Mutant::small_quorum: return "small-quorum";
    case Mutant::no_writeback: return "no-writeback";
  }
  return "none";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "sc_abd") return Protocol::sc_abd;
  if (s == "mw_abd") return Protocol::mw_abd;
  return std::nullopt;
}

std::optional<Mutant> parse_mutant(std::string_view s) {
  if (s == "none") return Mutant::none;
  if (s == "small-quorum") return Mutant::small_quorum;
  if (s == "no-writeback") return Mutant::no_writeback;
  return std::nullopt;
}

namespace {

template <class State>
const TimestampValuePair& stored_pair(const State& s, const RegisterId& r) {
  auto it = s.tvps.find(r);
  return it == s.tvps.end() ? kInitialPair : it->second;
}

template <class State>
void broadcast(const State& s, const MessageBody& body, std::vector<Message>& outbox) {
  for (ProcessId j = 1; j <= s.n; ++j) outbox.push_back(Message{s.self, j, body});
}

template <class State>
void require_idle(const State& s) {
  if (s.phase != Phase::idle) {
    throw std::logic_error("process " + std::to_string(s.self) +
                           " already has an outstanding operation");
  }
}

// Replica side, shared by both protocols.
template <class State>
BasicStepOutput<State> replica_query(State s, const Query& m, ProcessId from) {
  s.lt = clock_merge(s.lt, m.lt);
  Message reply{s.self, from, Response{s.lt, m.rid, stored_pair(s, m.reg)}};
  return {std::move(s), {std::move(reply)}, std::nullopt};
}

template <class State>
BasicStepOutput<State> replica_update(State s, const Update& m, ProcessId from) {
  s.lt = clock_merge(s.lt, m.lt);
  auto [it, inserted] = s.tvps.try_emplace(m.reg, m.tsv);
  if (!inserted && it->second < m.tsv) it->second = m.tsv;
  Message reply{s.self, from, Ack{s.lt, m.rid}};
  return {std::move(s), {std::move(reply)}, std::nullopt};
}

template <class State>
BasicStepOutput<State> unchanged(State s) {
  return {std::move(s), {}, std::nullopt};
}

template <class State>
BasicStepOutput<State> coordinator_ack(State s, const Ack& m, ProcessId from, bool reading) {
  if (m.rid != s.rid || s.phase != Phase::updating) return unchanged(std::move(s));
  s.lt = clock_merge(s.lt, m.lt);
  s.acks.insert(from);
  if (static_cast<int>(s.acks.size()) != s.quorum()) return unchanged(std::move(s));
  s.acks.clear();
  ++s.rid;
  s.phase = Phase::idle;
  Completion done{*s.opid, reading ? OpKind::read : OpKind::write,
                  reading ? std::optional<Value>(s.rval) : std::nullopt, s.tsv.ts, s.rounds};
  s.opid.reset();
  return {std::move(s), {}, done};
}

}  // namespace

const TimestampValuePair& ReplicaState::stored(const RegisterId& r) const {
  return stored_pair(*this, r);
}

int ReplicaState::quorum() const {
  if (mutant == Mutant::small_quorum) return std::max(1, n / 2);
  return quorum_size(n);
}

ReplicaState make_replica(ProcessId self, int n, Mutant mutant) {
  if (n < 1 || self < 1 || self > n) throw std::invalid_argument("make_replica: bad process id");
  ReplicaState s;
  s.self = self;
  s.n = n;
  s.mutant = mutant;
  return s;
}

StepOutput invoke_read(ReplicaState s, const RegisterId& r, OpId opid) {
  require_idle(s);
  s.lt = clock_local_step(s.lt);
  s.reading = true;
  s.rreg = r;
  ++s.rid;
  s.phase = Phase::querying;
  s.opid = opid;
  s.rounds = 1;
  std::vector<Message> out;
  broadcast(s, Query{s.lt, s.rid, r}, out);
  return {std::move(s), std::move(out), std::nullopt};
}

StepOutput invoke_write(ReplicaState s, const RegisterId& r, Value v, OpId opid) {
  require_idle(s);
  s.lt = clock_local_step(s.lt);
  s.reading = false;
  s.tsv = TimestampValuePair{Timestamp{s.lt, s.self}, v};
  ++s.rid;
  s.phase = Phase::updating;
  s.opid = opid;
  s.rounds = 1;
  std::vector<Message> out;
  broadcast(s, Update{s.lt, s.rid, r, s.tsv}, out);
  return {std::move(s), std::move(out), std::nullopt};
}

StepOutput handle_query(ReplicaState s, const Query& m, ProcessId from) {
  return replica_query(std::move(s), m, from);
}

StepOutput handle_response(ReplicaState s, const Response& m, ProcessId from) {
  if (m.rid != s.rid || s.phase != Phase::querying) return unchanged(std::move(s));
  s.lt = clock_merge(s.lt, m.lt);
  s.responses.emplace(m.tsv, from);
  if (static_cast<int>(s.responses.size()) != s.quorum()) return unchanged(std::move(s));

  s.tsv = s.responses.rbegin()->first;
  s.rval = s.tsv.val;
  s.responses.clear();
  ++s.rid;
  if (s.mutant == Mutant::no_writeback) {
    s.phase = Phase::idle;
    Completion done{*s.opid, OpKind::read, s.rval, s.tsv.ts, s.rounds};
    s.opid.reset();
    return {std::move(s), {}, done};
  }
  s.phase = Phase::updating;
  ++s.rounds;
  std::vector<Message> out;
  broadcast(s, Update{s.lt, s.rid, s.rreg, s.tsv}, out);
  return {std::move(s), std::move(out), std::nullopt};
}

StepOutput handle_update(ReplicaState s, const Update& m, ProcessId from) {
  return replica_update(std::move(s), m, from);
}

StepOutput handle_ack(ReplicaState s, const Ack& m, ProcessId from) {
  bool reading = s.reading;
  return coordinator_ack(std::move(s), m, from, reading);
}

StepOutput step(ReplicaState s, const Stimulus& stimulus) {
  if (const auto* r = std::get_if<InvokeRead>(&stimulus)) {
    return invoke_read(std::move(s), r->reg, r->opid);
  }
  if (const auto* w = std::get_if<InvokeWrite>(&stimulus)) {
    return invoke_write(std::move(s), w->reg, w->value, w->opid);
  }
  const Message& msg = std::get<Message>(stimulus);
  return std::visit(
      [&](const auto& body) -> StepOutput {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Query>) return handle_query(std::move(s), body, msg.sender);
        else if constexpr (std::is_same_v<T, Response>) return handle_response(std::move(s), body, msg.sender);
        else if constexpr (std::is_same_v<T, Update>) return handle_update(std::move(s), body, msg.sender);
        else return handle_ack(std::move(s), body, msg.sender);
      },
      msg.body);
}

// ---------------------------------------------------------------------------
// MW-ABD

const TimestampValuePair& MwAbdState::stored(const RegisterId& r) const {
  return stored_pair(*this, r);
}

int MwAbdState::quorum() const { return quorum_size(n); }

MwAbdState make_mwabd_replica(ProcessId self, int n) {
  if (n < 1 || self < 1 || self > n) throw std::invalid_argument("make_mwabd_replica: bad process id");
  MwAbdState s;
  s.self = self;
  s.n = n;
  return s;
}

namespace {

MwAbdStepOutput mwabd_invoke(MwAbdState s, OpKind kind, const RegisterId& r, Value v, OpId opid) {
  require_idle(s);
  s.lt = clock_local_step(s.lt);
  s.kind = kind;
  s.reg = r;
  s.wval = v;
  ++s.rid;
  s.phase = Phase::querying;
  s.opid = opid;
  s.rounds = 1;
  std::vector<Message> out;
  broadcast(s, Query{s.lt, s.rid, r}, out);
  return {std::move(s), std::move(out), std::nullopt};
}

MwAbdStepOutput mwabd_response(MwAbdState s, const Response& m, ProcessId from) {
  if (m.rid != s.rid || s.phase != Phase::querying) return unchanged(std::move(s));
  s.lt = clock_merge(s.lt, m.lt);
  s.responses.emplace(m.tsv, from);
  if (static_cast<int>(s.responses.size()) != s.quorum()) return unchanged(std::move(s));

  const TimestampValuePair& highest = s.responses.rbegin()->first;
  if (s.kind == OpKind::read) {
    s.tsv = highest;
    s.rval = highest.val;
  } else {
    s.tsv = TimestampValuePair{Timestamp{highest.ts.lt + 1, s.self}, s.wval};
  }
  s.responses.clear();
  ++s.rid;
  s.phase = Phase::updating;
  ++s.rounds;
  std::vector<Message> out;
  broadcast(s, Update{s.lt, s.rid, s.reg, s.tsv}, out);
  return {std::move(s), std::move(out), std::nullopt};
}

}  // namespace

MwAbdStepOutput mwabd_step(MwAbdState s, const Stimulus& stimulus) {
  if (const auto* r = std::get_if<InvokeRead>(&stimulus)) {
    return mwabd_invoke(std::move(s), OpKind::read, r->reg, 0, r->opid);
  }
  if (const auto* w = std::get_if<InvokeWrite>(&stimulus)) {
    return mwabd_invoke(std::move(s), OpKind::write, w->reg, w->value, w->opid);
  }
  const Message& msg = std::get<Message>(stimulus);
  return std::visit(
      [&](const auto& body) -> MwAbdStepOutput {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Query>) {
          return replica_query(std::move(s), body, msg.sender);
        } else if constexpr (std::is_same_v<T, Response>) {
          return mwabd_response(std::move(s), body, msg.sender);
        } else if constexpr (std::is_same_v<T, Update>) {
          return replica_update(std::move(s), body, msg.sender);
        } else {
          bool reading = s.kind == OpKind::read;
          return coordinator_ack(std::move(s), body, msg.sender, reading);
        }
      },
      msg.body);
}

}  // namespace scabd
