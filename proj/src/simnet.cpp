#include "scabd/simnet.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <tuple>

namespace scabd {

bool AdversarialRule::matches(const Message& m, Tick sent) const {
  return (from == 0 || from == m.sender) && (to == 0 || to == m.receiver) && sent >= start &&
         sent < end;
}

bool Trace::crashed(ProcessId p) const {
  return std::any_of(crashes.begin(), crashes.end(),
                     [p](const CrashRecord& c) { return c.proc == p; });
}

int max_faulty(int n) { return n - quorum_size(n); }

void validate_config(const SimConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("n must be at least 1");
  std::set<ProcessId> crashing;
  for (const CrashSpec& c : cfg.crashes) {
    if (c.pid < 1 || c.pid > cfg.n) {
      throw ConfigError("crash names process " + std::to_string(c.pid) + " outside 1.." +
                        std::to_string(cfg.n));
    }
    if (!crashing.insert(c.pid).second) {
      throw ConfigError("process " + std::to_string(c.pid) + " listed to crash twice");
    }
  }
  if (static_cast<int>(crashing.size()) > max_faulty(cfg.n)) {
    throw ConfigError("crash set of size " + std::to_string(crashing.size()) +
                      " exceeds f = " + std::to_string(max_faulty(cfg.n)) + " for n = " +
                      std::to_string(cfg.n));
  }
  auto check_uniform = [](const UniformDelay& u) {
    if (u.min < 1 || u.max < u.min) throw ConfigError("uniform delay needs 1 <= min <= max");
  };
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformDelay>) {
          check_uniform(d);
        } else if constexpr (std::is_same_v<T, PerLinkDelay>) {
          if (d.fallback < 1) throw ConfigError("link delays must be positive");
          for (const auto& [link, delay] : d.links) {
            if (delay < 1) throw ConfigError("link delays must be positive");
            if (link.first < 1 || link.first > cfg.n || link.second < 1 || link.second > cfg.n) {
              throw ConfigError("link delay names a process outside 1..n");
            }
          }
        } else {
          check_uniform(d.fallback);
          for (const AdversarialRule& r : d.rules) {
            if (r.delay < 1) throw ConfigError("adversarial rule delays must be positive");
            if (r.from < 0 || r.from > cfg.n || r.to < 0 || r.to > cfg.n) {
              throw ConfigError("adversarial rule names a process outside 0..n");
            }
          }
        }
      },
      cfg.delay);
  const Workload& w = cfg.workload;
  if (w.ops_per_process < 0) throw ConfigError("ops_per_process must be non-negative");
  if (!(w.read_fraction >= 0.0 && w.read_fraction <= 1.0)) {
    throw ConfigError("read_fraction must lie in [0, 1]");
  }
  if (w.register_count < 1) throw ConfigError("register_count must be at least 1");
  for (const ScriptedOp& op : w.script) {
    if (op.proc < 1 || op.proc > cfg.n) throw ConfigError("scripted operation for unknown process");
    if (op.reg.empty()) throw ConfigError("scripted operation without a register");
  }
  if (cfg.mutant != Mutant::none && cfg.protocol != Protocol::sc_abd) {
    throw ConfigError("mutants apply to sc_abd only");
  }
}

std::string register_name(int index) { return "x" + std::to_string(index); }

std::vector<std::vector<ScriptedOp>> generate_workload(const SimConfig& cfg,
                                                       std::mt19937_64& rng) {
  std::vector<std::vector<ScriptedOp>> plans(static_cast<std::size_t>(cfg.n));
  const Workload& w = cfg.workload;
  if (!w.script.empty()) {
    for (const ScriptedOp& op : w.script) plans[op.proc - 1].push_back(op);
    return plans;
  }
  std::uniform_int_distribution<Tick> start(0, w.think_time);
  std::uniform_int_distribution<int> reg(0, w.register_count - 1);
  std::bernoulli_distribution is_read(w.read_fraction);
  for (ProcessId p = 1; p <= cfg.n; ++p) {
    auto& plan = plans[p - 1];
    for (int k = 0; k < w.ops_per_process; ++k) {
      ScriptedOp op;
      op.proc = p;
      op.not_before = k == 0 ? start(rng) : 0;
      op.reg = register_name(reg(rng));
      op.kind = is_read(rng) ? OpKind::read : OpKind::write;
      if (op.kind == OpKind::write) op.value = static_cast<Value>(p) * 1'000'000 + k + 1;
      plan.push_back(std::move(op));
    }
  }
  return plans;
}

namespace {

struct Deliver {
  std::size_t message;  // index into Trace::messages
};
struct Invoke {};
struct Crash {};

struct SimEvent {
  Tick due = 0;
  std::uint64_t seq = 0;
  ProcessId proc = 0;
  std::variant<Deliver, Invoke, Crash> kind;
};

struct Later {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    return std::tie(a.due, a.seq) > std::tie(b.due, b.seq);
  }
};

using AnyReplica = std::variant<ReplicaState, MwAbdState>;

struct Process {
  AnyReplica replica;
  std::vector<ScriptedOp> plan;
  std::size_t next = 0;
  std::optional<OpId> outstanding;
  std::optional<Tick> last_exec;
  bool crashed = false;
  std::optional<Tick> crash_requested;  // deferred until the outstanding op completes
};

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    trace_.protocol = cfg.protocol;
    trace_.n = cfg.n;
    auto plans = generate_workload(cfg, rng_);
    for (ProcessId p = 1; p <= cfg.n; ++p) {
      Process proc;
      if (cfg.protocol == Protocol::sc_abd) proc.replica = make_replica(p, cfg.n, cfg.mutant);
      else proc.replica = make_mwabd_replica(p, cfg.n);
      proc.plan = std::move(plans[p - 1]);
      procs_.push_back(std::move(proc));
    }
    // Crashes first so a crash and an invocation due on the same tick crash first.
    for (const CrashSpec& c : cfg.crashes) push(c.at, c.pid, Crash{});
    for (ProcessId p = 1; p <= cfg.n; ++p) {
      const Process& proc = procs_[p - 1];
      if (!proc.plan.empty()) push(proc.plan.front().not_before, p, Invoke{});
    }
  }

  Trace run() && {
    while (!queue_.empty()) {
      if (queue_.top().due > cfg_.max_ticks) {
        trace_.outcome = RunOutcome::horizon_exhausted;
        trace_.end_tick = cfg_.max_ticks;
        return std::move(trace_);
      }
      SimEvent ev = queue_.top();
      queue_.pop();
      now_ = ev.due;
      dispatch(ev);
    }
    trace_.outcome = RunOutcome::quiescent;
    trace_.end_tick = now_;
    return std::move(trace_);
  }

 private:
  template <class Kind>
  void push(Tick due, ProcessId proc, Kind kind) {
    queue_.push(SimEvent{due, seq_++, proc, kind});
  }

  Tick draw_delay(const Message& m) {
    auto uniform = [this](const UniformDelay& u) {
      return std::uniform_int_distribution<Tick>(u.min, u.max)(rng_);
    };
    return std::visit(
        [&](const auto& d) -> Tick {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, UniformDelay>) {
            return uniform(d);
          } else if constexpr (std::is_same_v<T, PerLinkDelay>) {
            auto it = d.links.find({m.sender, m.receiver});
            return it == d.links.end() ? d.fallback : it->second;
          } else {
            for (const AdversarialRule& r : d.rules) {
              if (r.matches(m, now_)) return r.delay;
            }
            return uniform(d.fallback);
          }
        },
        cfg_.delay);
  }

  void dispatch(const SimEvent& ev) {
    Process& proc = procs_[ev.proc - 1];
    if (const auto* d = std::get_if<Deliver>(&ev.kind)) {
      if (proc.crashed) {
        MessageRecord& rec = trace_.messages[d->message];
        rec.dropped = true;
        rec.recv = Receipt{now_, false, 0, 0};
        return;
      }
    } else if (std::holds_alternative<Crash>(ev.kind)) {
      if (proc.crashed) return;
      if (proc.outstanding && !cfg_.mid_op_crash) {
        proc.crash_requested = now_;
      } else {
        crash(ev.proc, now_);
      }
      return;
    } else if (proc.crashed) {
      return;
    }

    // At most one handler execution per process per tick.
    if (proc.last_exec == now_) {
      push(now_ + 1, ev.proc, ev.kind);
      return;
    }

    if (const auto* d = std::get_if<Deliver>(&ev.kind)) {
      deliver(ev.proc, d->message);
    } else {
      invoke(ev.proc);
    }
  }

  void crash(ProcessId p, Tick requested) {
    Process& proc = procs_[p - 1];
    proc.crashed = true;
    proc.crash_requested.reset();
    trace_.crashes.push_back(CrashRecord{p, requested, now_});
  }

  LogicalTime clock_of(const Process& proc) const {
    return std::visit([](const auto& s) { return s.lt; }, proc.replica);
  }

  template <class Out>
  void absorb(ProcessId p, Out out, std::uint64_t step_index) {
    Process& proc = procs_[p - 1];
    for (Message& m : out.outbox) {
      Tick delay = draw_delay(m);
      trace_.messages.push_back(MessageRecord{std::move(m), step_index, now_, std::nullopt, false});
      push(now_ + delay, trace_.messages.back().msg.receiver,
           Deliver{trace_.messages.size() - 1});
    }
    if (out.completion) complete(p, *out.completion, out.state.lt, step_index);
    proc.replica = std::move(out.state);
  }

  template <class Fn>
  void run_handler(ProcessId p, const Stimulus& stimulus, Fn&& on_step) {
    Process& proc = procs_[p - 1];
    LogicalTime before = clock_of(proc);
    std::visit(
        [&](auto& state) {
          using S = std::decay_t<decltype(state)>;
          auto out = [&] {
            if constexpr (std::is_same_v<S, ReplicaState>) return step(std::move(state), stimulus);
            else return mwabd_step(std::move(state), stimulus);
          }();
          if (out.state.lt == before) {
            // Stale reply discarded: no handler ran.
            on_step(std::nullopt);
            proc.replica = std::move(out.state);
            return;
          }
          std::uint64_t index = trace_.steps.size();
          trace_.steps.push_back(StepRecord{p, now_, out.state.lt});
          proc.last_exec = now_;
          on_step(index);
          absorb(p, std::move(out), index);
        },
        proc.replica);
  }

  void deliver(ProcessId p, std::size_t message) {
    Message msg = trace_.messages[message].msg;
    run_handler(p, msg, [&](std::optional<std::uint64_t> index) {
      Receipt r{now_, index.has_value(), index.value_or(0), 0};
      if (index) r.lt = trace_.steps[*index].lt;
      trace_.messages[message].recv = r;
    });
  }

  void invoke(ProcessId p) {
    Process& proc = procs_[p - 1];
    const ScriptedOp& op = proc.plan[proc.next++];
    OpId opid = next_opid_++;
    proc.outstanding = opid;
    Stimulus stimulus = op.kind == OpKind::read
                            ? Stimulus(InvokeRead{op.reg, opid})
                            : Stimulus(InvokeWrite{op.reg, op.value, opid});
    Event inv;
    inv.kind = EventKind::invocation;
    inv.opid = opid;
    inv.proc = p;
    inv.op = op.kind;
    inv.reg = op.reg;
    if (op.kind == OpKind::write) inv.val = op.value;
    inv.rt = now_;
    std::size_t event_index = trace_.history.size();
    trace_.history.push_back(inv);
    trace_.event_steps.push_back(0);
    run_handler(p, stimulus, [&](std::optional<std::uint64_t> index) {
      Event& e = trace_.history[event_index];
      e.lt = trace_.steps[*index].lt;
      trace_.event_steps[event_index] = *index;
      // SC-ABD fixes a write's timestamp at invocation.
      if (cfg_.protocol == Protocol::sc_abd && op.kind == OpKind::write) {
        e.ts = Timestamp{*e.lt, p};
      }
    });
  }

  void complete(ProcessId p, const Completion& done, LogicalTime lt, std::uint64_t step_index) {
    Process& proc = procs_[p - 1];
    const Event* inv = nullptr;
    for (auto it = trace_.history.rbegin(); it != trace_.history.rend(); ++it) {
      if (it->opid == done.opid && it->kind == EventKind::invocation) {
        inv = &*it;
        break;
      }
    }
    Event res = *inv;
    res.kind = EventKind::response;
    res.ret = done.ret;
    res.rt = now_;
    res.lt = lt;
    res.ts = done.ts;
    trace_.history.push_back(std::move(res));
    trace_.event_steps.push_back(step_index);
    trace_.ops.push_back(OpRecord{done.opid, p, done.kind, done.rounds});
    proc.outstanding.reset();

    if (proc.crash_requested) {
      crash(p, *proc.crash_requested);
      return;
    }
    if (proc.next < proc.plan.size()) {
      Tick at = std::max(now_ + cfg_.workload.think_time, proc.plan[proc.next].not_before);
      push(at, p, Invoke{});
    }
  }

  const SimConfig& cfg_;
  std::mt19937_64 rng_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t seq_ = 0;
  Tick now_ = 0;
  OpId next_opid_ = 1;
  std::vector<Process> procs_;
  Trace trace_;
};

}  // namespace

Trace run_simulation(const SimConfig& cfg) {
  validate_config(cfg);
  return Simulator(cfg).run();
}

}  // namespace scabd
