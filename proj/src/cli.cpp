#include "scabd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include "scabd/io.hpp"

namespace scabd::cli {

namespace {

std::string rounds_summary(const std::map<int, std::size_t>& hist) {
  if (hist.empty()) return "-";
  if (hist.size() == 1) return std::to_string(hist.begin()->first);
  std::string s = "{";
  for (auto it = hist.begin(); it != hist.end(); ++it) {
    if (it != hist.begin()) s += ", ";
    s += std::to_string(it->first) + ": " + std::to_string(it->second);
  }
  return s + "}";
}

bool lacks_logical_time(const History& h) {
  return std::any_of(h.begin(), h.end(), [](const Event& e) { return !e.lt; });
}

void print_violation(std::ostream& out, const Violation& v) {
  out << v.condition;
  if (v.ops) out << " [operations " << v.ops->first << ", " << v.ops->second << "]";
}

int exit_for(Outcome o) {
  switch (o) {
    case Outcome::accepted: return kOk;
    case Outcome::rejected: return kRejected;
    case Outcome::undecided: return kUndecided;
  }
  return kUndecided;
}

}  // namespace

// ---------------------------------------------------------------------------
// run

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  std::ifstream in(opts.config);
  if (!in) {
    err << "error: cannot open config " << opts.config << '\n';
    return kIoError;
  }
  SimConfig cfg;
  try {
    cfg = parse_config(in);
    if (opts.seed) cfg.seed = *opts.seed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  Trace trace = run_simulation(cfg);

  std::ofstream hist(opts.out);
  std::ofstream msgs(sidecar_path(opts.out));
  if (!hist || !msgs) {
    err << "error: cannot write " << opts.out << '\n';
    return kIoError;
  }
  write_history(hist, trace.history);
  write_message_log(msgs, trace.messages);

  std::map<int, std::size_t> write_rounds, read_rounds;
  for (const OpRecord& op : trace.ops) {
    ++(op.kind == OpKind::write ? write_rounds : read_rounds)[op.rounds];
  }
  std::size_t invoked = collect_operations(trace.history).size();
  std::size_t writes = 0;
  for (auto& [r, c] : write_rounds) writes += c;
  out << "protocol: " << to_string(cfg.protocol) << "  n: " << cfg.n << "  seed: " << cfg.seed
      << "  mutant: " << to_string(cfg.mutant) << '\n';
  out << "outcome: "
      << (trace.outcome == RunOutcome::quiescent ? "quiescent" : "horizon exhausted")
      << " at tick " << trace.end_tick << '\n';
  out << "operations: " << invoked << " invoked, " << trace.ops.size() << " completed ("
      << writes << " writes, " << trace.ops.size() - writes << " reads)\n";
  out << "write rounds = " << rounds_summary(write_rounds) << '\n';
  out << "read rounds = " << rounds_summary(read_rounds) << '\n';
  out << "crashes: " << trace.crashes.size() << "  messages: " << trace.messages.size() << '\n';
  out << "history: " << opts.out.string() << "  message log: " << sidecar_path(opts.out).string()
      << '\n';

  if (trace.outcome == RunOutcome::horizon_exhausted) {
    err << "error: max_ticks reached before quiescence\n";
    return kHorizonExhausted;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// check

int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err) {
  std::ifstream in(opts.history);
  if (!in) {
    err << "error: cannot open history " << opts.history << '\n';
    return kIoError;
  }
  History h;
  try {
    h = read_history(in);
    validate_history(h, false);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseError;
  } catch (const HistoryError& e) {
    err << "malformed history: " << e.what() << '\n';
    return kParseError;
  }
  if (has_pending(h)) {
    err << "note: completing pending writes and dropping pending reads\n";
    h = complete_pending(h);
  }

  bool want_comp = opts.mode != CheckMode::bruteforce;
  bool want_oracle = opts.mode != CheckMode::compositional;
  if (want_comp && lacks_logical_time(h)) {
    err << "error: compositional checking needs an lt on every event\n";
    return kMissingLogicalTime;
  }

  std::optional<Verdict> comp, oracle;
  try {
    if (want_comp) comp = check_sc_compositional(h, opts.state_cap);
    if (want_oracle) oracle = check_sc_bruteforce(h, opts.oracle_cap);
  } catch (const HistoryError& e) {
    err << "malformed history: " << e.what() << '\n';
    return kParseError;
  }

  if (comp) {
    for (const RegisterVerdict& rv : comp->registers) {
      out << "register " << rv.reg << ": " << to_string(rv.outcome);
      if (rv.outcome == Outcome::accepted) {
        out << (rv.fast_path ? " (timestamp witness)"
                             : " (search, " + std::to_string(rv.explored_states) + " states)");
      } else if (rv.violation) {
        out << ": ";
        print_violation(out, *rv.violation);
      }
      out << '\n';
    }
    out << "compositional: " << to_string(comp->outcome);
    if (!comp->note.empty()) out << " (" << comp->note << ")";
    out << '\n';
  }
  if (oracle) {
    out << "oracle: " << to_string(oracle->outcome);
    if (oracle->violation) {
      out << ": ";
      print_violation(out, *oracle->violation);
    }
    if (!oracle->note.empty()) out << " (" << oracle->note << ")";
    out << '\n';
  }

  Outcome overall;
  if (comp && oracle) {
    bool decided = oracle->outcome != Outcome::undecided && comp->outcome != Outcome::undecided;
    out << "agreement: "
        << (decided ? (comp->outcome == oracle->outcome ? "yes" : "no") : "n/a") << '\n';
    overall = oracle->outcome != Outcome::undecided ? oracle->outcome : comp->outcome;
  } else {
    overall = comp ? comp->outcome : oracle->outcome;
  }
  out << "SC: " << to_string(overall) << '\n';
  return exit_for(overall);
}

// ---------------------------------------------------------------------------
// fuzz

SimConfig fuzz_config(std::uint64_t seed, Mutant mutant) {
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  static constexpr int kSizes[] = {3, 5, 7};
  static constexpr double kReadFractions[] = {0.25, 0.5, 0.75};

  SimConfig cfg;
  cfg.seed = seed;
  cfg.n = kSizes[pick(0, 2)];
  cfg.mutant = mutant;
  cfg.workload.read_fraction = kReadFractions[pick(0, 2)];
  cfg.workload.think_time = pick(0, 5);

  std::vector<ProcessId> pids(static_cast<std::size_t>(cfg.n));
  std::iota(pids.begin(), pids.end(), 1);
  std::shuffle(pids.begin(), pids.end(), rng);

  if (mutant == Mutant::none) {
    cfg.workload.ops_per_process = static_cast<int>(pick(1, 5));
    cfg.workload.register_count = static_cast<int>(pick(1, 3));
    cfg.delay = UniformDelay{1, pick(1, 30)};
    auto crashes = pick(0, static_cast<std::uint64_t>(max_faulty(cfg.n)));
    for (std::uint64_t i = 0; i < crashes; ++i) cfg.crashes.push_back({pids[i], pick(0, 100)});
    return cfg;
  }

  cfg.workload.ops_per_process = static_cast<int>(pick(3, 8));
  cfg.workload.register_count = 1;
  AdversarialSchedule sched;
  sched.fallback = UniformDelay{1, 3};
  std::uint64_t style = pick(0, 2);
  if (style == 0) {
    // Two groups that only hear each other late: with floor(n/2)-sized
    // quorums each side can finish operations on its own.
    std::set<ProcessId> left(pids.begin(), pids.begin() + cfg.n / 2);
    Tick slow = pick(100, 300);
    for (ProcessId a = 1; a <= cfg.n; ++a) {
      for (ProcessId b = 1; b <= cfg.n; ++b) {
        if (left.contains(a) != left.contains(b)) sched.rules.push_back({a, b, 0, 400, slow});
      }
    }
  } else if (style == 1) {
    // One replica is well connected until `turn`, then cut off while the
    // others recover: values it saw early are missing from later quorums.
    ProcessId hub = pids.front();
    Tick turn = pick(20, 60);
    Tick slow = pick(150, 300);
    for (ProcessId a = 1; a <= cfg.n; ++a) {
      for (ProcessId b = 1; b <= cfg.n; ++b) {
        if (a == b) continue;
        if (a == hub || b == hub) sched.rules.push_back({a, b, turn, turn + 300, slow});
        else sched.rules.push_back({a, b, 0, turn, slow});
      }
    }
  } else {
    // Independently slowed links during random windows.
    for (ProcessId a = 1; a <= cfg.n; ++a) {
      for (ProcessId b = 1; b <= cfg.n; ++b) {
        if (a == b || pick(0, 1) == 0) continue;
        Tick start = pick(0, 60);
        sched.rules.push_back({a, b, start, start + pick(10, 200), pick(20, 200)});
      }
    }
  }
  cfg.delay = std::move(sched);
  return cfg;
}

FuzzRunResult fuzz_one(std::uint64_t seed, Mutant mutant) {
  SimConfig cfg = fuzz_config(seed, mutant);
  Trace trace = run_simulation(cfg);
  FuzzRunResult r;
  r.seed = seed;
  for (const Operation& op : collect_operations(trace.history)) {
    if (!op.complete() && !trace.crashed(op.proc)) r.terminated = false;
  }
  if (trace.outcome != RunOutcome::quiescent) r.terminated = false;
  r.clocks_ok = audit_logical_clocks(trace);
  r.ts_order_ok = audit_proposition1(trace);
  r.outcome = check_sc_compositional(trace.history).outcome;
  return r;
}

int cmd_fuzz(const FuzzOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<FuzzRunResult> results(opts.runs);
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  auto worker = [&] {
    for (std::uint64_t i; (i = next++) < opts.runs;) {
      try {
        results[i] = fuzz_one(opts.seed0 + i, opts.mutant);
      } catch (const std::exception& e) {
        if (!failed.exchange(true)) failure = "seed " + std::to_string(opts.seed0 + i) + ": " + e.what();
      }
    }
  };
  unsigned jobs = std::max(1U, std::min<unsigned>(opts.jobs, 64));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failed) {
    err << "error: " << failure << '\n';
    return kConfigError;
  }

  std::size_t accepted = 0, rejected = 0, undecided = 0, clock_fail = 0, ts_fail = 0, stuck = 0;
  std::optional<std::uint64_t> first_violation;
  for (const FuzzRunResult& r : results) {
    accepted += r.outcome == Outcome::accepted;
    rejected += r.outcome == Outcome::rejected;
    undecided += r.outcome == Outcome::undecided;
    clock_fail += !r.clocks_ok;
    ts_fail += !r.ts_order_ok;
    stuck += !r.terminated;
    if (r.violation() && !first_violation) first_violation = r.seed;
  }
  out << "campaign: runs=" << opts.runs << " mutant=" << to_string(opts.mutant)
      << " seeds=" << opts.seed0 << ".." << (opts.runs ? opts.seed0 + opts.runs - 1 : opts.seed0)
      << '\n';
  out << "accepted: " << accepted << "/" << opts.runs << '\n';
  out << "rejected: " << rejected << "  undecided: " << undecided
      << "  clock-audit failures: " << clock_fail << "  ts-order failures: " << ts_fail
      << "  unfinished operations: " << stuck << '\n';
  out << "first violating seed: "
      << (first_violation ? std::to_string(*first_violation) : std::string("none")) << '\n';

  if (opts.mutant == Mutant::none) {
    if (first_violation) return kRejected;
    return undecided ? kUndecided : kOk;
  }
  return first_violation ? kOk : kRejected;
}

// ---------------------------------------------------------------------------
// stats

std::vector<std::pair<Operation, int>> rounds_from_log(const History& h,
                                                       const std::vector<MessageRecord>& log) {
  std::map<ProcessId, std::vector<std::pair<LogicalTime, RequestId>>> requests;
  for (const MessageRecord& m : log) {
    if (m.msg.is_request()) requests[m.msg.sender].emplace_back(m.msg.lt(), m.msg.rid());
  }
  std::vector<std::pair<Operation, int>> out;
  for (const Operation& op : collect_operations(h)) {
    if (!op.complete() || !h[op.inv_index].lt || !h[*op.res_index].lt) continue;
    LogicalTime lo = *h[op.inv_index].lt;
    LogicalTime hi = *h[*op.res_index].lt;
    std::set<RequestId> rids;
    for (auto [lt, rid] : requests[op.proc]) {
      if (lt >= lo && lt <= hi) rids.insert(rid);
    }
    out.emplace_back(op, static_cast<int>(rids.size()));
  }
  return out;
}

std::string latency_row(const std::vector<std::pair<OpKind, int>>& rounds) {
  std::set<int> w, r;
  for (auto [kind, n] : rounds) (kind == OpKind::write ? w : r).insert(n);
  auto cell = [](const std::set<int>& s) {
    if (s.empty()) return std::string("-");
    std::string c;
    for (int n : s) c += (c.empty() ? "" : "/") + std::to_string(n);
    return c;
  };
  return "W:" + cell(w) + ", R:" + cell(r);
}

int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err) {
  std::ifstream in(opts.history);
  if (!in) {
    err << "error: cannot open history " << opts.history << '\n';
    return kIoError;
  }
  History h;
  std::optional<std::vector<MessageRecord>> log;
  try {
    h = read_history(in);
    validate_history(h, false);
    std::ifstream side(sidecar_path(opts.history));
    if (side) log = read_message_log(side);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseError;
  } catch (const HistoryError& e) {
    err << "malformed history: " << e.what() << '\n';
    return kParseError;
  }

  std::vector<Operation> ops = collect_operations(h);
  if (!log) {
    err << "warning: no message log at " << sidecar_path(opts.history)
        << "; reporting counts only\n";
    std::size_t reads = 0, writes = 0, pending = 0;
    for (const Operation& op : ops) {
      if (!op.complete()) ++pending;
      else ++(op.kind == OpKind::read ? reads : writes);
    }
    out << "completed writes: " << writes << "  completed reads: " << reads
        << "  pending: " << pending << '\n';
    return kOk;
  }

  std::map<std::pair<OpKind, int>, std::size_t> hist;
  std::vector<std::pair<OpKind, int>> rounds;
  for (const auto& [op, n] : rounds_from_log(h, *log)) {
    ++hist[{op.kind, n}];
    rounds.emplace_back(op.kind, n);
  }
  out << "kind   rounds  operations\n";
  for (const auto& [key, count] : hist) {
    std::string kind(to_string(key.first));
    out << kind << std::string(7 - kind.size(), ' ') << key.second << "       " << count << '\n';
  }
  if (!rounds.empty()) out << "latency: " << latency_row(rounds) << '\n';
  return kOk;
}

}  // namespace scabd::cli
