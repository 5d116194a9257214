#include <gtest/gtest.h>

#include "streamfort/errors.hpp"
#include "streamfort/sim.hpp"

using namespace sf;

namespace {

Task produce(Scheduler& s, Channel& ch, int n, bool close) {
  for (int i = 0; i < n; ++i) co_await s.write(ch, static_cast<Word>(i));
  if (close) ch.close();
}

Task consume(Scheduler& s, Channel& ch, std::vector<Word>& got) {
  while (auto w = co_await s.read(ch)) got.push_back(*w);
}

Task take(Scheduler& s, Channel& ch, int n, std::vector<Word>& got) {
  for (int i = 0; i < n; ++i) {
    auto w = co_await s.read(ch);
    if (w) got.push_back(*w);
  }
}

Task spin(Scheduler& s, Channel& a) {
  for (;;) {
    co_await s.write(a, 1);
    co_await s.read(a);
  }
}

Task wait_mark(Scheduler& s, const std::int64_t& mark, std::int64_t need, std::vector<Word>& log) {
  co_await s.until(mark, need);
  log.push_back(static_cast<Word>(need));
}

Task bump(Scheduler& s, std::int64_t& mark, Channel& tick, int n) {
  for (int i = 0; i < n; ++i) {
    ++mark;
    co_await s.write(tick, 0);
  }
}

}  // namespace

TEST(Channel, FifoOrder) {
  for (std::int64_t cap : {1, 2, 7, 64}) {
    Scheduler s;
    Channel ch("c", cap);
    std::vector<Word> got;
    s.spawn("p", produce(s, ch, 100, true));
    s.spawn("c", consume(s, ch, got));
    s.run();
    ASSERT_EQ(got.size(), 100U);
    for (Word i = 0; i < 100; ++i) EXPECT_EQ(got[i], i);
    EXPECT_EQ(ch.pushes(), 100);
    EXPECT_EQ(ch.pops(), 100);
  }
}

TEST(Channel, ClosedAndDrainedReadsNothing) {
  Scheduler s;
  Channel ch("c", 4);
  std::vector<Word> got;
  s.spawn("p", produce(s, ch, 2, true));
  s.spawn("c", take(s, ch, 5, got));
  s.run();
  EXPECT_EQ(got.size(), 2U);
  EXPECT_TRUE(ch.closed());
}

TEST(Channel, WriteAfterClose) {
  Channel ch("c", 4);
  ch.push(1);
  ch.close();
  EXPECT_THROW(ch.push(2), WriteAfterClose);
}

TEST(Channel, WriterSuspendsWhenFull) {
  Scheduler s;
  Channel ch("c", 2);
  std::vector<Word> got;
  s.spawn("p", produce(s, ch, 10, false));
  s.spawn("c", take(s, ch, 10, got));
  s.run();
  EXPECT_EQ(got.size(), 10U);
  // The producer cannot run ahead by more than the capacity.
  EXPECT_GT(s.counters_of(0).stallCycles, 0);
}

TEST(Channel, DeadlockNamesTheBlockedProcess) {
  Scheduler s;
  Channel ch("c", 1);
  std::vector<Word> got;
  s.spawn("producer", produce(s, ch, 3, false));
  s.spawn("consumer", take(s, ch, 1, got));
  try {
    s.run();
    FAIL() << "no deadlock reported";
  } catch (const DeadlockDetected& e) {
    EXPECT_EQ(e.blocked(), std::vector<std::string>{"producer"});
  }
}

TEST(Channel, ReadersWaitingOnEachOtherDeadlock) {
  Scheduler s;
  Channel a("a", 1);
  Channel b("b", 1);
  std::vector<Word> x;
  std::vector<Word> y;
  s.spawn("left", take(s, a, 1, x));
  s.spawn("right", take(s, b, 1, y));
  try {
    s.run();
    FAIL();
  } catch (const DeadlockDetected& e) {
    EXPECT_EQ(e.blocked(), (std::vector<std::string>{"left", "right"}));
  }
}

TEST(Channel, StepBudget) {
  SchedConfig cfg;
  cfg.maxSteps = 1000;
  Scheduler s(cfg);
  Channel a("a", 4);
  s.spawn("spin", spin(s, a));
  EXPECT_THROW(s.run(), NonTermination);
}

TEST(Channel, Watermark) {
  Scheduler s;
  std::int64_t mark = 0;
  Channel tick("t", 1);
  std::vector<Word> log;
  std::vector<Word> sink;
  s.spawn("w", wait_mark(s, mark, 3, log));
  s.spawn("b", bump(s, mark, tick, 5));
  s.spawn("t", take(s, tick, 5, sink));
  s.run();
  EXPECT_EQ(log, std::vector<Word>{3});
  EXPECT_EQ(mark, 5);
}

TEST(Channel, RandomScheduleSameResult) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = parse_sched("random:" + std::to_string(seed));
    ASSERT_TRUE(cfg);
    Scheduler s(*cfg);
    Channel ch("c", 1 + static_cast<std::int64_t>(seed % 3));
    std::vector<Word> got;
    s.spawn("p", produce(s, ch, 50, true));
    s.spawn("c", consume(s, ch, got));
    s.run();
    ASSERT_EQ(got.size(), 50U);
    for (Word i = 0; i < 50; ++i) EXPECT_EQ(got[i], i);
  }
}

TEST(Channel, ParseSched) {
  EXPECT_EQ(parse_sched("rr")->mode, SchedMode::RoundRobin);
  auto r = parse_sched("random:42");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->mode, SchedMode::Random);
  EXPECT_EQ(r->seed, 42U);
  EXPECT_FALSE(parse_sched("random:"));
  EXPECT_FALSE(parse_sched("fifo"));
}

TEST(Channel, ProcessErrorsPropagate) {
  Scheduler s;
  Channel ch("c", 2);
  ch.close();
  s.spawn("p", produce(s, ch, 1, false));
  EXPECT_THROW(s.run(), WriteAfterClose);
}
