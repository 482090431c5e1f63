#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "scabd/io.hpp"
#include "test_support.hpp"

using namespace scabd;
using scabd::testing::HistoryBuilder;

TEST(HistoryLines, ExactFormat) {
  History h = HistoryBuilder()
                  .inv_write(1, 1, "x", 5)
                  .res(1)
                  .inv_read(2, 2, "x")
                  .res(2, 5)
                  .ts(1, {1, 1})
                  .build();
  h[2].ts.reset();
  h[3].ts = Timestamp{1, 1};
  EXPECT_EQ(to_json_line(h[0]),
            R"({"kind":"inv","opid":1,"proc":1,"op":"write","reg":"x","val":5,"ret":null,"rt":0,"lt":1,"ts":[1,1]})");
  EXPECT_EQ(to_json_line(h[1]),
            R"({"kind":"res","opid":1,"proc":1,"op":"write","reg":"x","val":5,"ret":"OK","rt":1,"lt":2,"ts":[1,1]})");
  EXPECT_EQ(to_json_line(h[2]),
            R"({"kind":"inv","opid":2,"proc":2,"op":"read","reg":"x","val":null,"ret":null,"rt":2,"lt":3,"ts":null})");
  EXPECT_EQ(to_json_line(h[3]),
            R"({"kind":"res","opid":2,"proc":2,"op":"read","reg":"x","val":null,"ret":5,"rt":3,"lt":4,"ts":[1,1]})");
}

TEST(HistoryLines, MissingLogicalTimeIsNull) {
  Event e = HistoryBuilder().inv_read(1, 1, "x").build()[0];
  e.lt.reset();
  std::string line = to_json_line(e);
  EXPECT_NE(line.find(R"("lt":null)"), std::string::npos);
  EXPECT_EQ(event_from_json_line(line), e);
}

TEST(HistoryLines, HandWrittenFixture) {
  std::istringstream in(
      "{\"kind\":\"inv\",\"opid\":1,\"proc\":1,\"op\":\"write\",\"reg\":\"x\",\"val\":1,"
      "\"ret\":null,\"rt\":0,\"lt\":1,\"ts\":null}\n"
      "\n"
      "{\"kind\":\"res\",\"opid\":1,\"proc\":1,\"op\":\"write\",\"reg\":\"x\",\"val\":1,"
      "\"ret\":\"OK\",\"rt\":1,\"lt\":2,\"ts\":null}\n");
  History h = read_history(in);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[1].kind, EventKind::response);
  EXPECT_EQ(h[1].lt, 2u);
  EXPECT_FALSE(h[1].ts);
}

TEST(HistoryLines, ParseErrors) {
  auto fails_at = [](const std::string& text, std::size_t line) {
    std::istringstream in(text);
    try {
      read_history(in);
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << text;
      return;
    }
    ADD_FAILURE() << "accepted: " << text;
  };
  const std::string ok =
      R"({"kind":"inv","opid":1,"proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})";
  fails_at("not json\n", 1);
  fails_at(ok + "\n[1,2]\n", 2);
  fails_at(R"({"kind":"start","opid":1,"proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"inv","proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"inv","opid":1,"proc":0,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"inv","opid":1,"proc":1,"op":"write","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"res","opid":1,"proc":1,"op":"write","reg":"x","val":1,"ret":3,"rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"res","opid":1,"proc":1,"op":"read","reg":"x","val":null,"ret":"OK","rt":0,"lt":1,"ts":null})", 1);
  fails_at(R"({"kind":"inv","opid":1,"proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":"1","ts":null})", 1);
  fails_at(R"({"kind":"inv","opid":1,"proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":[1]})", 1);
  fails_at(R"({"kind":"inv","opid":-1,"proc":1,"op":"read","reg":"x","val":null,"ret":null,"rt":0,"lt":1,"ts":null})", 1);
}

TEST(HistoryLines, RoundTripProperty) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> coin(0, 2);
  for (int i = 0; i < 2'000; ++i) {
    History h = scabd::testing::random_history(rng, 4, 10, 3);
    for (Event& e : h) {
      if (coin(rng) == 0) e.lt.reset();
      if (coin(rng) == 0) e.ts = Timestamp{static_cast<LogicalTime>(coin(rng)), coin(rng) + 1};
      e.rt = static_cast<Tick>(rng() % 1000);
    }
    std::stringstream buf;
    write_history(buf, h);
    ASSERT_EQ(read_history(buf), h);
  }
}

TEST(MessageLog, RoundTripsSimulatedRuns) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SimConfig cfg;
    cfg.n = 5;
    cfg.seed = seed;
    cfg.workload.ops_per_process = 3;
    cfg.crashes = {{5, 10}};
    cfg.mid_op_crash = seed % 2 == 0;
    Trace t = run_simulation(cfg);
    std::stringstream buf;
    write_message_log(buf, t.messages);
    ASSERT_EQ(read_message_log(buf), t.messages);
  }
}

TEST(MessageLog, LineShape) {
  MessageRecord m{Message{2, 1, Response{7, 3, {{4, 2}, 9}}}, 5, 11, Receipt{14, true, 8, 12}, false};
  EXPECT_EQ(to_json_line(m),
            R"({"from":2,"to":1,"type":"response","lt":7,"rid":3,"ts":[4,2],"val":9,"send_rt":11,"send_step":5,"recv_rt":14,"handled":true,"recv_step":8,"recv_lt":12,"dropped":false})");
  EXPECT_EQ(message_from_json_line(to_json_line(m)), m);
  EXPECT_THROW(message_from_json_line(R"({"from":2,"to":1,"type":"ping","lt":7,"rid":3})"), ParseError);
}

TEST(MessageLog, SidecarPath) {
  EXPECT_EQ(sidecar_path("runs/a.jsonl"), std::filesystem::path("runs/a.msgs.jsonl"));
  EXPECT_EQ(sidecar_path("h"), std::filesystem::path("h.msgs.jsonl"));
}

// ---------------------------------------------------------------------------
// Run configuration

TEST(Config, ParsesAllKeys) {
  std::istringstream in(R"(# five replicas
n = 5
seed = 42
protocol = sc_abd
mutant = small-quorum
mid_op_crash = true
max_ticks = 5000
delay = adversarial
delay_min = 2
delay_max = 4
rule = 1,2,0,100,50
rule = 0,3,10,inf,7   # everything to p3
crash = 4@30
ops_per_process = 3
read_fraction = 0.25
register_count = 2
think_time = 3
op = 1,write,x,5,0
op = 2,read,x,,10
)");
  SimConfig cfg = parse_config(in);
  EXPECT_EQ(cfg.n, 5);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.mutant, Mutant::small_quorum);
  EXPECT_TRUE(cfg.mid_op_crash);
  EXPECT_EQ(cfg.max_ticks, 5000u);
  const auto& adv = std::get<AdversarialSchedule>(cfg.delay);
  EXPECT_EQ(adv.fallback, (UniformDelay{2, 4}));
  ASSERT_EQ(adv.rules.size(), 2u);
  EXPECT_EQ(adv.rules[0], (AdversarialRule{1, 2, 0, 100, 50}));
  EXPECT_EQ(adv.rules[1].end, std::numeric_limits<Tick>::max());
  EXPECT_EQ(cfg.crashes, (std::vector<CrashSpec>{{4, 30}}));
  EXPECT_EQ(cfg.workload.read_fraction, 0.25);
  ASSERT_EQ(cfg.workload.script.size(), 2u);
  EXPECT_EQ(cfg.workload.script[1], (ScriptedOp{2, OpKind::read, "x", 0, 10}));
}

TEST(Config, PerLink) {
  std::istringstream in("n = 3\ndelay = per_link\nlink_default = 2\nlink = 1,3,9\n");
  SimConfig cfg = parse_config(in);
  const auto& pl = std::get<PerLinkDelay>(cfg.delay);
  EXPECT_EQ(pl.fallback, 2u);
  EXPECT_EQ(pl.links.at({1, 3}), 9u);
}

TEST(Config, Rejections) {
  auto rejects = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), ConfigError) << text;
  };
  rejects("n = 5\ncrash = 1@0\ncrash = 2@0\ncrash = 3@0\n");
  rejects("n = 3\ncolour = blue\n");
  rejects("n = 3\nn = 4\n");
  rejects("n = three\n");
  rejects("n = 3\nprotocol = paxos\n");
  rejects("n = 3\ndelay = uniform\nrule = 1,2,0,10,5\n");
  rejects("n = 3\nlink = 1,2,5\n");
  rejects("n = 3\ncrash = 2\n");
  rejects("n = 3\nop = 1,read,x,4,0\n");
  rejects("n = 3\nop = 1,scan,x,,0\n");
  rejects("n = 3\nread_fraction = 2\n");
  rejects("n = 3\nmid_op_crash = maybe\n");
  rejects("just words\n");
}

TEST(Config, FormatRoundTrip) {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 1'000; ++i) {
    SimConfig cfg;
    cfg.n = std::uniform_int_distribution<int>(1, 7)(rng);
    cfg.seed = rng();
    cfg.max_ticks = rng() % 100'000 + 1;
    cfg.mid_op_crash = rng() % 2;
    cfg.workload.ops_per_process = static_cast<int>(rng() % 10);
    cfg.workload.read_fraction = std::uniform_real_distribution<double>(0, 1)(rng);
    cfg.workload.register_count = static_cast<int>(rng() % 4) + 1;
    cfg.workload.think_time = rng() % 5;
    switch (rng() % 3) {
      case 0: cfg.delay = UniformDelay{1 + rng() % 3, 4 + rng() % 3}; break;
      case 1: cfg.delay = PerLinkDelay{1 + rng() % 3, {{{1, cfg.n}, 1 + rng() % 9}}}; break;
      default: {
        AdversarialSchedule adv;
        adv.rules.push_back({0, 1, rng() % 10, std::numeric_limits<Tick>::max(), 5});
        adv.rules.push_back({1, 0, 0, 100, 9});
        cfg.delay = adv;
      }
    }
    if (cfg.n >= 3) cfg.crashes.push_back({2, rng() % 50});
    if (rng() % 2) {
      cfg.workload.script.push_back({1, OpKind::write, "x0", 17, 3});
      cfg.workload.script.push_back({1, OpKind::read, "x0", 0, 0});
    }
    std::istringstream in(format_config(cfg));
    ASSERT_EQ(parse_config(in), cfg) << format_config(cfg);
  }
}
