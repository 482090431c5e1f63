#include "scabd/checker.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace scabd {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::accepted: return "accepted";
    case Outcome::rejected: return "rejected";
    case Outcome::undecided: return "undecided";
  }
  return "undecided";
}

// ---------------------------------------------------------------------------
// Logical-time history

History build_logical_time_history(const History& h) {
  struct Keyed {
    LogicalTime lt;
    ProcessId proc;
    std::size_t seq;
    std::size_t index;
  };
  std::vector<Keyed> keys;
  keys.reserve(h.size());
  std::unordered_map<ProcessId, std::size_t> seq;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Event& e = h[i];
    if (!e.lt) {
      throw HistoryError("event " + std::to_string(i) + " (operation " + std::to_string(e.opid) +
                         ") has no logical time");
    }
    keys.push_back({*e.lt, e.proc, seq[e.proc]++, i});
  }
  std::sort(keys.begin(), keys.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.lt, a.proc, a.seq) < std::tie(b.lt, b.proc, b.seq);
  });
  History out;
  out.reserve(h.size());
  for (const Keyed& k : keys) out.push_back(h[k.index]);
  if (!histories_equivalent(out, h)) {
    throw HistoryError("logical times do not increase along some process subhistory");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequential histories

bool is_sequential(const History& s) {
  if (s.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const Event& inv = s[i];
    const Event& res = s[i + 1];
    if (inv.kind != EventKind::invocation || res.kind != EventKind::response) return false;
    if (inv.opid != res.opid) return false;
  }
  return true;
}

bool is_legal_sequential(const History& s) {
  if (!is_sequential(s)) throw HistoryError("history is not sequential");
  std::unordered_map<RegisterId, Value> value;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const Event& inv = s[i];
    const Event& res = s[i + 1];
    if (inv.op == OpKind::write) {
      if (!inv.val) throw HistoryError("write without an argument");
      value[inv.reg] = *inv.val;
    } else {
      auto it = value.find(inv.reg);
      Value expected = it == value.end() ? 0 : it->second;
      if (!res.ret || *res.ret != expected) return false;
    }
  }
  return true;
}

std::optional<std::pair<OpId, OpId>> find_precedence_violation(const History& h,
                                                               const History& s) {
  std::unordered_map<OpId, std::pair<std::size_t, std::size_t>> pos;  // inv, res in h
  for (const Operation& op : collect_operations(h)) {
    pos[op.opid] = {op.inv_index, op.res_index.value_or(std::numeric_limits<std::size_t>::max())};
  }
  // Scan s backwards keeping the earliest response among operations placed
  // later in s; an invocation after that response is an inversion.
  std::size_t min_res = std::numeric_limits<std::size_t>::max();
  OpId min_op = 0;
  for (std::size_t i = s.size(); i >= 2; i -= 2) {
    OpId o = s[i - 2].opid;
    auto it = pos.find(o);
    if (it == pos.end()) throw HistoryError("witness contains an unknown operation");
    auto [inv, res] = it->second;
    if (min_res < inv) return std::make_pair(min_op, o);
    if (res < min_res) {
      min_res = res;
      min_op = o;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Search engine shared by the linearizability checker and the SC oracle.

namespace {

class OpSet {
 public:
  explicit OpSet(std::size_t n) : words_((n + 63) / 64, 0) {}
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i) { words_[i / 64] |= (std::uint64_t{1} << (i % 64)); }
  void reset(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  std::vector<std::uint64_t> words_;
};

History sequential_from(const History& h, const std::vector<Operation>& ops,
                        const std::vector<std::size_t>& order) {
  History s;
  s.reserve(order.size() * 2);
  for (std::size_t i : order) {
    s.push_back(h[ops[i].inv_index]);
    s.push_back(h[*ops[i].res_index]);
  }
  return s;
}

using CandidateFn = std::function<void(const OpSet&, std::vector<std::size_t>&)>;

struct SearchResult {
  Outcome outcome = Outcome::rejected;
  std::vector<std::size_t> order;
  std::uint64_t explored = 0;
  std::optional<Violation> violation;
};

/// Depth-first search for an order of `ops` in which every read returns the
/// current value of its register. `candidates` lists the operations allowed
/// to come next given the set already placed.
SearchResult search_legal_order(const std::vector<Operation>& ops, const CandidateFn& candidates,
                                std::uint64_t max_states) {
  const std::size_t m = ops.size();
  std::unordered_map<RegisterId, std::size_t> reg_index;
  std::vector<std::size_t> reg_of(m);
  for (std::size_t i = 0; i < m; ++i) {
    reg_of[i] = reg_index.try_emplace(ops[i].reg, reg_index.size()).first->second;
  }
  std::vector<Value> values(reg_index.size(), 0);
  OpSet done(m);

  auto key = [&] {
    std::string k(done.words().size() * 8 + values.size() * 8, '\0');
    std::memcpy(k.data(), done.words().data(), done.words().size() * 8);
    std::memcpy(k.data() + done.words().size() * 8, values.data(), values.size() * 8);
    return k;
  };

  struct Frame {
    std::vector<std::size_t> cands;
    std::size_t next = 0;
    bool descended = false;
    bool memo_hit = false;
  };

  SearchResult result;
  std::unordered_set<std::string> visited;
  visited.insert(key());
  result.explored = 1;

  std::vector<std::size_t> path;
  std::vector<Value> saved;
  std::vector<Frame> stack(1);
  candidates(done, stack.back().cands);
  std::size_t best_depth = 0;
  bool have_dead_end = false;

  while (!stack.empty()) {
    if (path.size() == m) {
      result.outcome = Outcome::accepted;
      result.order = path;
      return result;
    }
    Frame& f = stack.back();
    if (f.next == f.cands.size()) {
      if (!f.descended && !f.memo_hit && (!have_dead_end || path.size() > best_depth)) {
        have_dead_end = true;
        best_depth = path.size();
        // Blame the first candidate read against the latest write to its register.
        for (std::size_t c : f.cands) {
          if (ops[c].kind != OpKind::read) continue;
          Violation v;
          v.reg = ops[c].reg;
          v.condition = "read " + std::to_string(ops[c].opid) + " returned " +
                        std::to_string(ops[c].ret.value_or(0)) +
                        " but no legal order places it after a write of that value";
          for (auto it = path.rbegin(); it != path.rend(); ++it) {
            if (ops[*it].kind == OpKind::write && ops[*it].reg == ops[c].reg) {
              v.ops = std::make_pair(ops[*it].opid, ops[c].opid);
              break;
            }
          }
          result.violation = v;
          break;
        }
      }
      stack.pop_back();
      if (!path.empty()) {
        std::size_t last = path.back();
        values[reg_of[last]] = saved.back();
        done.reset(last);
        path.pop_back();
        saved.pop_back();
      }
      continue;
    }
    std::size_t i = f.cands[f.next++];
    const Operation& op = ops[i];
    std::size_t r = reg_of[i];
    if (op.kind == OpKind::read && values[r] != op.ret.value_or(0)) continue;
    Value before = values[r];
    if (op.kind == OpKind::write) values[r] = *op.arg;
    done.set(i);
    if (!visited.insert(key()).second) {
      values[r] = before;
      done.reset(i);
      f.memo_hit = true;
      continue;
    }
    if (++result.explored > max_states) {
      result.outcome = Outcome::undecided;
      result.violation.reset();
      return result;
    }
    f.descended = true;
    path.push_back(i);
    saved.push_back(before);
    Frame next;
    candidates(done, next.cands);
    stack.push_back(std::move(next));
  }
  result.outcome = Outcome::rejected;
  if (!result.violation) {
    result.violation = Violation{"", "no legal sequential order exists", std::nullopt};
  }
  return result;
}

}  // namespace

Verdict check_linearizable(const History& h, std::uint64_t max_states) {
  validate_history(h, true);
  std::vector<Operation> ops = collect_operations(h);
  const std::size_t m = ops.size();
  CandidateFn candidates = [&](const OpSet& done, std::vector<std::size_t>& out) {
    std::size_t min_res = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < m; ++i) {
      if (!done.test(i)) min_res = std::min(min_res, *ops[i].res_index);
    }
    for (std::size_t i = 0; i < m && ops[i].inv_index < min_res; ++i) {
      if (!done.test(i)) out.push_back(i);
    }
  };
  SearchResult r = search_legal_order(ops, candidates, max_states);
  Verdict v;
  v.outcome = r.outcome;
  v.explored_states = r.explored;
  if (r.outcome == Outcome::accepted) {
    v.witness = sequential_from(h, ops, r.order);
  } else if (r.outcome == Outcome::rejected) {
    v.violation = r.violation;
    if (v.violation->reg.empty() && !ops.empty()) v.violation->reg = ops.front().reg;
    v.violation->condition = "not linearizable: " + v.violation->condition;
  } else {
    v.note = "search stopped after " + std::to_string(r.explored) + " states";
  }
  return v;
}

Verdict check_sc_bruteforce(const History& h, std::size_t max_ops) {
  validate_history(h, true);
  std::vector<Operation> ops = collect_operations(h);
  Verdict v;
  if (ops.size() > max_ops) {
    v.outcome = Outcome::undecided;
    v.note = "history has " + std::to_string(ops.size()) + " operations; oracle cap is " +
             std::to_string(max_ops);
    return v;
  }
  std::map<ProcessId, std::vector<std::size_t>> program;
  for (std::size_t i = 0; i < ops.size(); ++i) program[ops[i].proc].push_back(i);
  CandidateFn candidates = [&](const OpSet& done, std::vector<std::size_t>& out) {
    for (const auto& [p, seq] : program) {
      for (std::size_t i : seq) {
        if (!done.test(i)) {
          out.push_back(i);
          break;
        }
      }
    }
  };
  SearchResult r = search_legal_order(ops, candidates, std::numeric_limits<std::uint64_t>::max());
  v.outcome = r.outcome;
  v.explored_states = r.explored;
  if (r.outcome == Outcome::accepted) {
    v.witness = sequential_from(h, ops, r.order);
  } else {
    v.violation = r.violation;
    v.violation->condition = "not sequentially consistent: " + v.violation->condition;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Timestamp witness

History construct_timestamp_witness(const History& hx, const TimestampMap& ts) {
  std::vector<Operation> ops = collect_operations(hx);
  if (!ops.empty()) {
    for (const Operation& op : ops) {
      if (op.reg != ops.front().reg) throw HistoryError("timestamp witness needs a single register");
      if (!op.complete()) throw HistoryError("timestamp witness needs a complete history");
    }
  }
  auto ts_of = [&](const Operation& op) {
    auto it = ts.find(op.opid);
    if (it == ts.end()) {
      throw HistoryError("operation " + std::to_string(op.opid) + " has no timestamp");
    }
    return it->second;
  };
  std::set<Timestamp> write_ts;
  for (const Operation& op : ops) {
    if (op.kind == OpKind::write && !write_ts.insert(ts_of(op)).second) {
      throw HistoryError("two writes share timestamp (" + std::to_string(ts_of(op).lt) + "," +
                         std::to_string(ts_of(op).pid) + ")");
    }
  }
  using Key = std::tuple<Timestamp, int, LogicalTime, ProcessId, OpId>;
  std::vector<std::pair<Key, std::size_t>> keyed;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Operation& op = ops[i];
    Timestamp t = ts_of(op);
    if (op.kind == OpKind::read && t != kInitialTimestamp && !write_ts.contains(t)) {
      throw HistoryError("read " + std::to_string(op.opid) +
                         " carries a timestamp written by no operation");
    }
    LogicalTime inv_lt = hx[op.inv_index].lt.value_or(0);
    keyed.emplace_back(Key{t, op.kind == OpKind::write ? 0 : 1, inv_lt, op.proc, op.opid}, i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& [k, i] : keyed) order.push_back(i);
  return sequential_from(hx, ops, order);
}

History construct_timestamp_witness(const History& hx) {
  TimestampMap ts;
  for (const Operation& op : collect_operations(hx)) {
    if (op.ts) ts.emplace(op.opid, *op.ts);
  }
  return construct_timestamp_witness(hx, ts);
}

// ---------------------------------------------------------------------------
// Compositional SC check

namespace {

/// Merges per-register witnesses into one sequential history. The precedence
/// graph (register witness order plus process order) is acyclic whenever
/// every register witness preserves the precedence of H^lt|x.
History compose_witness(const History& h, const std::vector<History>& register_witnesses) {
  std::vector<Operation> ops = collect_operations(h);
  std::unordered_map<OpId, std::size_t> index;
  for (std::size_t i = 0; i < ops.size(); ++i) index[ops[i].opid] = i;
  std::vector<std::vector<std::size_t>> succ(ops.size());
  std::vector<std::size_t> indegree(ops.size(), 0);
  auto edge = [&](std::size_t a, std::size_t b) {
    succ[a].push_back(b);
    ++indegree[b];
  };
  for (const History& w : register_witnesses) {
    for (std::size_t i = 2; i < w.size(); i += 2) edge(index.at(w[i - 2].opid), index.at(w[i].opid));
  }
  std::unordered_map<ProcessId, std::size_t> last;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    auto [it, fresh] = last.try_emplace(ops[i].proc, i);
    if (!fresh) {
      edge(it->second, i);
      it->second = i;
    }
  }
  using Key = std::tuple<Timestamp, LogicalTime, ProcessId, OpId, std::size_t>;
  auto key_of = [&](std::size_t i) {
    const Operation& op = ops[i];
    LogicalTime inv_lt = h[op.inv_index].lt.value_or(0);
    return Key{op.ts.value_or(Timestamp{inv_lt, op.proc}), inv_lt, op.proc, op.opid, i};
  };
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (indegree[i] == 0) ready.push(key_of(i));
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    std::size_t i = std::get<4>(ready.top());
    ready.pop();
    order.push_back(i);
    for (std::size_t j : succ[i]) {
      if (--indegree[j] == 0) ready.push(key_of(j));
    }
  }
  if (order.size() != ops.size()) {
    throw std::logic_error("register witnesses and process order form a cycle");
  }
  return sequential_from(h, ops, order);
}

}  // namespace

Verdict check_sc_compositional(const History& h, std::uint64_t max_states) {
  validate_history(h, true);
  History hlt = build_logical_time_history(h);
  std::vector<RegisterId> regs = registers_of(hlt);
  std::sort(regs.begin(), regs.end());

  Verdict verdict;
  std::vector<History> witnesses;
  for (const RegisterId& x : regs) {
    History hx = project_register(hlt, x);
    RegisterVerdict rv;
    rv.reg = x;
    std::optional<History> witness;

    try {
      History s = construct_timestamp_witness(hx);
      if (is_legal_sequential(s) && histories_equivalent(s, hx) &&
          !find_precedence_violation(hx, s)) {
        witness = std::move(s);
        rv.fast_path = true;
      }
    } catch (const HistoryError&) {
      // Missing or inconsistent instrumentation: fall back to search.
    }

    if (!witness) {
      Verdict lin = check_linearizable(hx, max_states);
      rv.outcome = lin.outcome;
      rv.explored_states = lin.explored_states;
      verdict.explored_states += lin.explored_states;
      if (lin.violation) {
        rv.violation = lin.violation;
        rv.violation->reg = x;
      }
      witness = std::move(lin.witness);
    }
    if (witness) witnesses.push_back(std::move(*witness));
    verdict.registers.push_back(std::move(rv));
  }

  for (const RegisterVerdict& rv : verdict.registers) {
    if (rv.outcome == Outcome::rejected) {
      verdict.outcome = Outcome::rejected;
      verdict.violation = rv.violation;
      return verdict;
    }
  }
  for (const RegisterVerdict& rv : verdict.registers) {
    if (rv.outcome == Outcome::undecided) {
      verdict.outcome = Outcome::undecided;
      verdict.note = "register " + rv.reg + " exhausted the search budget after " +
                     std::to_string(rv.explored_states) + " states";
      return verdict;
    }
  }

  History composed = compose_witness(hlt, witnesses);
  if (!is_legal_sequential(composed) || !histories_equivalent(composed, h)) {
    throw std::logic_error("composed witness failed certification");
  }
  verdict.outcome = Outcome::accepted;
  verdict.witness = std::move(composed);
  return verdict;
}

// ---------------------------------------------------------------------------
// Trace audits

bool audit_logical_clocks(const Trace& t) {
  std::unordered_map<ProcessId, LogicalTime> last;
  for (const StepRecord& s : t.steps) {
    auto [it, fresh] = last.try_emplace(s.proc, s.lt);
    if (!fresh) {
      if (s.lt <= it->second) return false;
      it->second = s.lt;
    }
  }
  for (const MessageRecord& m : t.messages) {
    if (m.send_step >= t.steps.size()) return false;
    const StepRecord& send = t.steps[m.send_step];
    if (send.proc != m.msg.sender || send.lt != m.msg.lt()) return false;
    if (!m.recv || !m.recv->handled) continue;
    if (m.recv->step >= t.steps.size()) return false;
    const StepRecord& recv = t.steps[m.recv->step];
    if (recv.proc != m.msg.receiver || recv.lt != m.recv->lt) return false;
    if (m.recv->lt <= m.msg.lt()) return false;
  }
  if (t.event_steps.size() != t.history.size()) return false;
  for (std::size_t i = 0; i < t.history.size(); ++i) {
    const Event& e = t.history[i];
    if (t.event_steps[i] >= t.steps.size()) return false;
    const StepRecord& s = t.steps[t.event_steps[i]];
    if (!e.lt || s.proc != e.proc || s.lt != *e.lt) return false;
  }
  return true;
}

bool audit_proposition1(const History& h) {
  History complete;
  for (const Operation& op : collect_operations(h)) {
    if (!op.complete()) continue;
    if (!op.ts) return false;
  }
  std::unordered_set<OpId> done;
  for (const Event& e : h) {
    if (e.kind == EventKind::response) done.insert(e.opid);
  }
  for (const Event& e : h) {
    if (done.contains(e.opid)) complete.push_back(e);
  }
  History hlt = build_logical_time_history(complete);
  for (const RegisterId& x : registers_of(hlt)) {
    History hx = project_register(hlt, x);
    std::vector<Operation> ops = collect_operations(hx);
    std::unordered_map<OpId, const Operation*> by_id;
    for (const Operation& op : ops) by_id[op.opid] = &op;
    // Running maximum of ts over operations whose response has been seen.
    std::optional<Timestamp> max_done;
    for (const Event& e : hx) {
      const Operation& op = *by_id.at(e.opid);
      if (e.kind == EventKind::response) {
        if (!max_done || *max_done < *op.ts) max_done = op.ts;
      } else if (op.kind == OpKind::read && max_done && *op.ts < *max_done) {
        return false;
      }
    }
  }
  return true;
}

bool audit_proposition1(const Trace& t) { return audit_proposition1(t.history); }

// ---------------------------------------------------------------------------
// Pending operations

bool has_pending(const History& h) {
  std::vector<Operation> ops = collect_operations(h);
  return std::any_of(ops.begin(), ops.end(), [](const Operation& op) { return !op.complete(); });
}

History complete_pending(const History& h) {
  std::vector<Operation> ops = collect_operations(h);
  std::unordered_set<OpId> dropped;
  std::vector<const Operation*> to_finish;
  for (const Operation& op : ops) {
    if (op.complete()) continue;
    if (op.kind == OpKind::read) dropped.insert(op.opid);
    else to_finish.push_back(&op);
  }
  History out;
  Tick rt = 0;
  LogicalTime lt = 0;
  for (const Event& e : h) {
    rt = std::max(rt, e.rt);
    lt = std::max(lt, e.lt.value_or(0));
    if (!dropped.contains(e.opid)) out.push_back(e);
  }
  for (const Operation* op : to_finish) {
    Event res = h[op->inv_index];
    res.kind = EventKind::response;
    res.ret.reset();
    res.rt = ++rt;
    if (h[op->inv_index].lt) res.lt = ++lt;
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace scabd
