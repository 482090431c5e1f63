#include <gtest/gtest.h>

#include <random>

#include "scabd/checker.hpp"
#include "test_support.hpp"

using namespace scabd;
using scabd::testing::HistoryBuilder;
using scabd::testing::naive_linearizable;
using scabd::testing::naive_sequentially_consistent;

namespace {

Event ev(EventKind k, OpId id, ProcessId p, LogicalTime lt) {
  Event e;
  e.kind = k;
  e.opid = id;
  e.proc = p;
  e.op = OpKind::write;
  e.reg = "x";
  e.val = static_cast<Value>(id);
  e.lt = lt;
  return e;
}

std::vector<OpId> op_order(const History& s) {
  std::vector<OpId> out;
  for (const Event& e : s) {
    if (e.kind == EventKind::invocation) out.push_back(e.opid);
  }
  return out;
}

SimConfig small_run(std::uint64_t seed) {
  SimConfig cfg;
  cfg.n = 3;
  cfg.seed = seed;
  cfg.workload.ops_per_process = 4;
  cfg.workload.register_count = 2;
  cfg.delay = UniformDelay{1, 15};
  cfg.crashes = {{3, 20}};
  return cfg;
}

// p1 writes x=1 and completes; p2 then reads 0 in real time, but p2's clock
// never heard from p1 so its events carry smaller logical times.
History stale_but_consistent() {
  return HistoryBuilder()
      .inv_write(1, 1, "x", 1, 1)
      .res(1, std::nullopt, 3)
      .inv_read(2, 2, "x", 1)
      .res(2, 0, 2)
      .ts(1, {1, 1})
      .ts(2, {0, 0})
      .build();
}

}  // namespace

// ---------------------------------------------------------------------------
// Logical-time history

TEST(LogicalTime, SortedInputUnchanged) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 1).build();
  EXPECT_EQ(build_logical_time_history(h), h);
}

TEST(LogicalTime, ReordersByClock) {
  History h{ev(EventKind::invocation, 1, 2, 5), ev(EventKind::invocation, 2, 1, 3)};
  History s = build_logical_time_history(h);
  EXPECT_EQ(s[0].opid, 2u);
  EXPECT_EQ(s[1].opid, 1u);
}

TEST(LogicalTime, TiesBrokenByProcess) {
  History h{ev(EventKind::invocation, 1, 2, 4), ev(EventKind::invocation, 2, 1, 4)};
  History s = build_logical_time_history(h);
  EXPECT_EQ(s[0].proc, 1);
  EXPECT_EQ(s[1].proc, 2);
}

TEST(LogicalTime, Errors) {
  History missing = HistoryBuilder().write(1, 1, "x", 1).build();
  missing[1].lt.reset();
  EXPECT_THROW(build_logical_time_history(missing), HistoryError);
  History backwards{ev(EventKind::invocation, 1, 1, 5), ev(EventKind::response, 1, 1, 2)};
  EXPECT_THROW(build_logical_time_history(backwards), HistoryError);
}

// ---------------------------------------------------------------------------
// Sequential histories

TEST(Legality, Examples) {
  EXPECT_TRUE(is_legal_sequential(HistoryBuilder().write(1, 1, "x", 1).read(2, 1, "x", 1).build()));
  EXPECT_TRUE(is_legal_sequential(HistoryBuilder().read(1, 1, "x", 0).build()));
  EXPECT_FALSE(is_legal_sequential(
      HistoryBuilder().write(1, 1, "x", 1).write(2, 2, "x", 2).read(3, 1, "x", 1).build()));
  EXPECT_TRUE(is_legal_sequential(
      HistoryBuilder().write(1, 1, "x", 1).write(2, 2, "y", 2).read(3, 1, "x", 1).build()));
  EXPECT_TRUE(is_legal_sequential({}));
}

TEST(Legality, NonSequentialInput) {
  History h = HistoryBuilder().inv_write(1, 1, "x", 1).inv_read(2, 2, "x").res(1).res(2, 1).build();
  EXPECT_FALSE(is_sequential(h));
  EXPECT_THROW(is_legal_sequential(h), HistoryError);
}

TEST(Precedence, FindsInvertedPair) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 0).build();
  History s = HistoryBuilder().read(2, 2, "x", 0).write(1, 1, "x", 1).build();
  auto v = find_precedence_violation(h, s);
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, (std::pair<OpId, OpId>{1, 2}));
  EXPECT_FALSE(find_precedence_violation(h, h));
}

// ---------------------------------------------------------------------------
// Linearizability

TEST(Linearizable, ReadAfterWrite) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 1).build();
  Verdict v = check_linearizable(h);
  EXPECT_EQ(v.outcome, Outcome::accepted);
  ASSERT_TRUE(v.witness);
  EXPECT_TRUE(naive_linearizable(h));
}

TEST(Linearizable, StaleReadAfterCompletedWrite) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 0).build();
  ASSERT_FALSE(naive_linearizable(h));
  Verdict v = check_linearizable(h);
  EXPECT_EQ(v.outcome, Outcome::rejected);
  ASSERT_TRUE(v.violation);
  EXPECT_EQ(v.violation->reg, "x");
  ASSERT_TRUE(v.violation->ops);
  EXPECT_EQ(*v.violation->ops, (std::pair<OpId, OpId>{1, 2}));
}

TEST(Linearizable, ConcurrentWritesReadTwoWays) {
  History h = HistoryBuilder()
                  .inv_write(1, 1, "x", 1)
                  .inv_write(2, 2, "x", 2)
                  .res(1)
                  .res(2)
                  .read(3, 3, "x", 1)
                  .read(4, 3, "x", 2)
                  .build();
  ASSERT_FALSE(naive_linearizable(h));
  EXPECT_EQ(check_linearizable(h).outcome, Outcome::rejected);
}

TEST(Linearizable, ConcurrentReadMaySeeEitherValue) {
  for (Value seen : {0, 1}) {
    History h =
        HistoryBuilder().inv_write(1, 1, "x", 1).inv_read(2, 2, "x").res(2, seen).res(1).build();
    EXPECT_TRUE(naive_linearizable(h));
    EXPECT_EQ(check_linearizable(h).outcome, Outcome::accepted);
  }
}

TEST(Linearizable, SearchBudget) {
  History h;
  {
    HistoryBuilder b;
    for (OpId i = 1; i <= 8; ++i) b.inv_write(i, static_cast<ProcessId>(i), "x", static_cast<Value>(i));
    for (OpId i = 1; i <= 8; ++i) b.res(i);
    b.read(9, 1, "x", 42);
    h = b.build();
  }
  Verdict v = check_linearizable(h, 10);
  EXPECT_EQ(v.outcome, Outcome::undecided);
  EXPECT_FALSE(v.note.empty());
  EXPECT_EQ(check_linearizable(h).outcome, Outcome::rejected);
}

TEST(Linearizable, RejectsPendingOperations) {
  History h = HistoryBuilder().inv_write(1, 1, "x", 1).build();
  EXPECT_THROW(check_linearizable(h), HistoryError);
}

// ---------------------------------------------------------------------------
// Timestamp witness

TEST(TimestampWitness, ReadSlotsAfterItsWrite) {
  History h = HistoryBuilder()
                  .write(1, 1, "x", 1)
                  .write(2, 2, "x", 2)
                  .read(3, 3, "x", 1)
                  .ts(1, {1, 1})
                  .ts(2, {3, 2})
                  .ts(3, {1, 1})
                  .build();
  History s = construct_timestamp_witness(h);
  EXPECT_EQ(op_order(s), (std::vector<OpId>{1, 3, 2}));
  EXPECT_TRUE(is_sequential(s));
}

TEST(TimestampWitness, SameTimestampReadsByInvocationTime) {
  History h = HistoryBuilder()
                  .write(1, 1, "x", 1)
                  .inv_read(2, 2, "x", 6)
                  .inv_read(3, 3, "x", 4)
                  .res(2, 1)
                  .res(3, 1)
                  .build();
  TimestampMap ts{{1, {1, 1}}, {2, {1, 1}}, {3, {1, 1}}};
  EXPECT_EQ(op_order(construct_timestamp_witness(h, ts)), (std::vector<OpId>{1, 3, 2}));
}

TEST(TimestampWitness, InitialReadsFirst) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 0).build();
  TimestampMap ts{{1, {1, 1}}, {2, {0, 0}}};
  EXPECT_EQ(op_order(construct_timestamp_witness(h, ts)), (std::vector<OpId>{2, 1}));
}

TEST(TimestampWitness, Errors) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 1).build();
  EXPECT_THROW(construct_timestamp_witness(h, TimestampMap{{1, {1, 1}}}), HistoryError);
  EXPECT_THROW(construct_timestamp_witness(h, TimestampMap{{1, {1, 1}}, {2, {5, 5}}}), HistoryError);
}

// ---------------------------------------------------------------------------
// Sequential consistency

TEST(Compositional, UnmutatedRunsTakeTheFastPath) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Trace t = run_simulation(small_run(seed));
    Verdict v = check_sc_compositional(t.history);
    ASSERT_EQ(v.outcome, Outcome::accepted) << seed;
    for (const RegisterVerdict& rv : v.registers) EXPECT_TRUE(rv.fast_path) << seed;
    ASSERT_TRUE(v.witness);
    EXPECT_TRUE(is_legal_sequential(*v.witness));
    EXPECT_TRUE(histories_equivalent(*v.witness, t.history));
  }
}

TEST(Compositional, StaleReadConsistentInLogicalTime) {
  History h = stale_but_consistent();
  ASSERT_FALSE(naive_linearizable(h));
  ASSERT_TRUE(naive_sequentially_consistent(h));
  EXPECT_EQ(check_linearizable(h).outcome, Outcome::rejected);
  EXPECT_EQ(check_sc_compositional(h).outcome, Outcome::accepted);
  EXPECT_EQ(check_sc_bruteforce(h).outcome, Outcome::accepted);
}

TEST(Compositional, FallsBackWithoutTimestamps) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 2, "x", 1).write(3, 2, "y", 4).build();
  Verdict v = check_sc_compositional(h);
  EXPECT_EQ(v.outcome, Outcome::accepted);
  for (const RegisterVerdict& rv : v.registers) EXPECT_FALSE(rv.fast_path);
}

TEST(Compositional, SameProcessStaleReadNamesRegister) {
  History h = HistoryBuilder().write(1, 1, "x", 1).read(2, 1, "x", 0).build();
  ASSERT_FALSE(naive_sequentially_consistent(h));
  Verdict v = check_sc_compositional(h);
  EXPECT_EQ(v.outcome, Outcome::rejected);
  ASSERT_TRUE(v.violation);
  EXPECT_EQ(v.violation->reg, "x");
  EXPECT_EQ(check_sc_bruteforce(h).outcome, Outcome::rejected);
}

TEST(Compositional, MissingLogicalTime) {
  History h = HistoryBuilder().write(1, 1, "x", 1).build();
  h[0].lt.reset();
  EXPECT_THROW(check_sc_compositional(h), HistoryError);
}

TEST(Bruteforce, SingleProcess) {
  History h = HistoryBuilder().write(1, 1, "x", 3).read(2, 1, "x", 3).read(3, 1, "y", 0).build();
  Verdict v = check_sc_bruteforce(h);
  EXPECT_EQ(v.outcome, Outcome::accepted);
  ASSERT_TRUE(v.witness);
  EXPECT_EQ(op_order(*v.witness), (std::vector<OpId>{1, 2, 3}));
}

TEST(Bruteforce, CrossRegisterReads) {
  // p1: w(x,1) w(y,1); p2: r(y)->1 r(x)->0, all concurrent in real time
  History h = HistoryBuilder()
                  .inv_write(1, 1, "x", 1)
                  .inv_read(3, 2, "y")
                  .res(1)
                  .inv_write(2, 1, "y", 1)
                  .res(2)
                  .res(3, 1)
                  .inv_read(4, 2, "x")
                  .res(4, 0)
                  .build();
  bool expected = naive_sequentially_consistent(h);
  EXPECT_FALSE(expected);
  EXPECT_EQ(check_sc_bruteforce(h).accepted(), expected);
}

TEST(Bruteforce, ReadWithoutWriter) {
  History h = HistoryBuilder().read(1, 1, "x", 1).build();
  Verdict v = check_sc_bruteforce(h);
  EXPECT_EQ(v.outcome, Outcome::rejected);
  ASSERT_TRUE(v.violation);
  EXPECT_EQ(v.violation->reg, "x");
}

TEST(Bruteforce, OverCapIsUndecided) {
  HistoryBuilder b;
  for (OpId i = 1; i <= 11; ++i) b.write(i, 1, "x", static_cast<Value>(i));
  Verdict v = check_sc_bruteforce(b.build());
  EXPECT_EQ(v.outcome, Outcome::undecided);
  EXPECT_EQ(check_sc_bruteforce(b.build(), 11).outcome, Outcome::accepted);
}

// ---------------------------------------------------------------------------
// Audits

TEST(ClockAudit, UnmutatedRun) {
  EXPECT_TRUE(audit_logical_clocks(run_simulation(small_run(7))));
}

TEST(ClockAudit, LoweredReceiveTime) {
  Trace t = run_simulation(small_run(7));
  for (MessageRecord& m : t.messages) {
    if (m.recv && m.recv->handled) {
      m.recv->lt = m.msg.lt();
      t.steps[m.recv->step].lt = m.msg.lt();
      break;
    }
  }
  EXPECT_FALSE(audit_logical_clocks(t));
}

TEST(ClockAudit, EmptyTrace) { EXPECT_TRUE(audit_logical_clocks(Trace{})); }

TEST(TimestampOrderAudit, UnmutatedRun) { EXPECT_TRUE(audit_proposition1(run_simulation(small_run(9)))); }

TEST(TimestampOrderAudit, SingleOperation) {
  EXPECT_TRUE(audit_proposition1(HistoryBuilder().write(1, 1, "x", 1).ts(1, {1, 1}).build()));
}

TEST(TimestampOrderAudit, ReadBehindCompletedWrite) {
  History h = HistoryBuilder()
                  .write(1, 1, "x", 1)
                  .read(2, 2, "x", 0)
                  .ts(1, {1, 1})
                  .ts(2, {0, 0})
                  .build();
  EXPECT_FALSE(audit_proposition1(h));
}

TEST(TimestampOrderAudit, ReadsMustNotGoBackwards) {
  History h = HistoryBuilder()
                  .inv_write(1, 1, "x", 1)
                  .read(2, 2, "x", 1)
                  .read(3, 3, "x", 0)
                  .res(1)
                  .ts(1, {1, 1})
                  .ts(2, {1, 1})
                  .ts(3, {0, 0})
                  .build();
  EXPECT_FALSE(audit_proposition1(h));
}

// ---------------------------------------------------------------------------
// Pending operations

TEST(Pending, ReadsDroppedWritesCompleted) {
  History h = HistoryBuilder()
                  .inv_write(1, 1, "x", 1, 4)
                  .inv_read(2, 2, "x", 2)
                  .write(3, 3, "y", 5)
                  .build();
  ASSERT_TRUE(has_pending(h));
  History c = complete_pending(h);
  EXPECT_FALSE(has_pending(c));
  ASSERT_EQ(c.size(), 4u);
  for (const Event& e : c) EXPECT_NE(e.opid, 2u);
  const Event& tail = c.back();
  EXPECT_EQ(tail.opid, 1u);
  EXPECT_EQ(tail.kind, EventKind::response);
  LogicalTime max_lt = 0;
  for (const Event& e : h) max_lt = std::max(max_lt, *e.lt);
  EXPECT_EQ(*tail.lt, max_lt + 1);
  EXPECT_NO_THROW(validate_history(c));
}

TEST(Pending, CompleteHistoryUnchanged) {
  History h = HistoryBuilder().write(1, 1, "x", 1).build();
  EXPECT_FALSE(has_pending(h));
  EXPECT_EQ(complete_pending(h), h);
}

// ---------------------------------------------------------------------------
// Randomized cross-checks against the naive references

TEST(CheckerProperties, LogicalTimeHistoryIsEquivalent) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10'000; ++i) {
    History h = scabd::testing::random_history(rng, 3, 8, 2);
    // Scramble the real-time order; logical times still increase per process.
    History shuffled = scabd::testing::shuffle_preserving_processes(h, rng);
    ASSERT_TRUE(histories_equivalent(build_logical_time_history(shuffled), shuffled));
  }
}

TEST(CheckerProperties, LinearizabilityMatchesNaiveReference) {
  std::mt19937_64 rng(42);
  int accepted = 0;
  for (int i = 0; i < 10'000; ++i) {
    History h = scabd::testing::random_history(rng, 3, 7, 2);
    Verdict v = check_linearizable(h);
    ASSERT_EQ(v.accepted(), naive_linearizable(h)) << "case " << i;
    if (v.accepted()) {
      ++accepted;
      ASSERT_TRUE(is_legal_sequential(*v.witness));
      ASSERT_TRUE(histories_equivalent(*v.witness, h));
      ASSERT_FALSE(find_precedence_violation(h, *v.witness));
    }
  }
  EXPECT_GT(accepted, 1000);
}

TEST(CheckerProperties, BruteforceMatchesNaiveReference) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 10'000; ++i) {
    History h = scabd::testing::random_history(rng, 3, 7, 2);
    Verdict v = check_sc_bruteforce(h);
    ASSERT_EQ(v.accepted(), naive_sequentially_consistent(h)) << "case " << i;
    if (v.accepted()) {
      ASSERT_TRUE(is_legal_sequential(*v.witness));
      ASSERT_TRUE(histories_equivalent(*v.witness, h));
    }
  }
}

TEST(CheckerProperties, CompositionalAcceptanceIsSound) {
  std::mt19937_64 rng(44);
  int accepted = 0;
  for (int i = 0; i < 10'000; ++i) {
    History h = scabd::testing::random_history(rng, 3, 8, 2);
    Verdict v = check_sc_compositional(h);
    if (!v.accepted()) continue;
    ++accepted;
    ASSERT_TRUE(is_legal_sequential(*v.witness));
    ASSERT_TRUE(histories_equivalent(*v.witness, h));
    ASSERT_TRUE(naive_sequentially_consistent(h)) << "case " << i;
  }
  EXPECT_GT(accepted, 500);
}
