#include <gtest/gtest.h>

#include "corpus.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/sim.hpp"
#include "streamfort/sw2d.hpp"

using namespace sf;

namespace {

constexpr Variant kVariants[] = {Variant::Baseline, Variant::Channelized, Variant::SmartCache};

struct Case {
  FunctionalIR ir;
  HostState init;
};

const Case& case8() {
  static const Case c = [] {
    auto ir = sftest::corpus_ir(sftest::grid(8, 8, 5));
    auto init = ir_initial_state(ir);
    return Case{std::move(ir), std::move(init)};
  }();
  return c;
}

void expect_live_equal(const HostState& a, const HostState& b, const std::string& what) {
  for (const auto& n : sw2d::live_fields()) EXPECT_EQ(a.at(n), b.at(n)) << what << ": " << n;
}

}  // namespace

TEST(Simulate, ZeroStepsReturnsTheInitialState) {
  const auto& c = case8();
  for (Variant v : kVariants) {
    auto r = run_pipeline(lower(c.ir, v), c.init, 0);
    expect_live_equal(r.host, c.init, to_string(v));
    EXPECT_EQ(r.report.totals.global_accesses(), 0) << to_string(v);
  }
}

TEST(Simulate, MatchesTheReferenceModel) {
  const auto& c = case8();
  auto p = sftest::grid(8, 8, 5);
  auto ref = sw2d::to_host(sw2d::run_reference(p, 5));
  for (Variant v : kVariants) {
    auto r = run_pipeline(lower(c.ir, v), c.init, 5);
    expect_live_equal(r.host, ref, to_string(v));
  }
}

TEST(Simulate, StepByStepAgreesWithTheIr) {
  const auto& c = case8();
  HostState ir_state = c.init;
  for (int t = 1; t <= 5; ++t) {
    run_ir_step(c.ir, ir_state);
    auto r = run_pipeline(lower(c.ir, Variant::SmartCache), c.init, t);
    expect_live_equal(r.host, ir_state, "step " + std::to_string(t));
  }
}

TEST(Simulate, ScheduleAndCapacityDoNotChangeResults) {
  auto ir = sftest::corpus_ir(sftest::grid(6, 5, 3));
  auto init = ir_initial_state(ir);
  for (Variant v : {Variant::Channelized, Variant::SmartCache}) {
    auto g = lower(ir, v);
    auto expect = run_pipeline(g, init, 3).host;
    for (std::int64_t cap : {1, 2, 64}) {
      set_capacity(g, cap);
      for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        SimOptions o;
        o.sched = *parse_sched("random:" + std::to_string(seed));
        auto r = run_pipeline(g, init, 3, o);
        expect_live_equal(r.host, expect, std::string(to_string(v)) + " cap " + std::to_string(cap));
        EXPECT_FALSE(r.report.deadlock);
      }
    }
  }
}

TEST(Simulate, ChannelsDrainCompletely) {
  const auto& c = case8();
  for (Variant v : {Variant::Channelized, Variant::SmartCache}) {
    auto r = run_pipeline(lower(c.ir, v), c.init, 5);
    EXPECT_FALSE(r.report.channels.empty());
    for (const auto& [name, st] : r.report.channels) {
      EXPECT_EQ(st.pushes, st.pops + st.residual) << name;
      EXPECT_EQ(st.residual, 0) << name;
      EXPECT_GT(st.pushes, 0) << name;
    }
  }
}

TEST(Simulate, SmartCacheKernelsStayOffGlobalMemory) {
  const auto& c = case8();
  auto r = run_pipeline(lower(c.ir, Variant::SmartCache), c.init, 5);
  for (const char* k : {"dyn", "shapiro", "update"}) {
    ASSERT_TRUE(r.report.perKernel.count(k)) << k;
    EXPECT_EQ(r.report.perKernel.at(k).global_accesses(), 0) << k;
  }
  for (const auto& [name, ctr] : r.report.perKernel) {
    if (name.rfind("sc_", 0) == 0) EXPECT_EQ(ctr.global_accesses(), 0) << name;
  }
  EXPECT_GT(r.report.perKernel.at("mem_read").globalReads, 0);
  EXPECT_GT(r.report.perKernel.at("mem_write").globalWrites, 0);
}

TEST(Simulate, ClosedFormCountsMatchTheRun) {
  for (auto [nx, ny, nt] : {std::tuple{8, 8, 5}, std::tuple{7, 5, 3}}) {
    auto ir = sftest::corpus_ir(sftest::grid(nx, ny, nt));
    auto init = ir_initial_state(ir);
    const std::int64_t n = static_cast<std::int64_t>(nx) * ny;
    const std::int64_t size = static_cast<std::int64_t>(nx + 2) * (ny + 2);
    const std::map<Variant, std::int64_t> per_step{
        {Variant::Baseline, 36 * n}, {Variant::Channelized, 29 * n}, {Variant::SmartCache, 6 * size + 5 * n}};
    for (Variant v : kVariants) {
      auto g = lower(ir, v);
      auto r = run_pipeline(g, init, nt);
      auto closed = count_accesses(g, nt);
      EXPECT_EQ(r.report.totals.global_accesses(), closed.totals.global_accesses()) << to_string(v);
      EXPECT_EQ(closed.totals.global_accesses(), per_step.at(v) * nt) << to_string(v);
      for (const auto& [k, ctr] : closed.perKernel) {
        EXPECT_EQ(r.report.perKernel.at(k).globalReads, ctr.globalReads) << k;
        EXPECT_EQ(r.report.perKernel.at(k).globalWrites, ctr.globalWrites) << k;
      }
    }
  }
}

TEST(Simulate, ShapeMismatch) {
  const auto& c = case8();
  HostState bad = c.init;
  bad["eta"] = Field::array(BaseType::Real, Shape{{0, 0}, {3, 3}});
  EXPECT_THROW(run_pipeline(lower(c.ir, Variant::Baseline), bad, 1), ShapeMismatch);
  HostState missing = c.init;
  missing.erase("h0");
  EXPECT_THROW(run_pipeline(lower(c.ir, Variant::SmartCache), missing, 1), ShapeMismatch);
}

TEST(Simulate, StepBudgetIsEnforced) {
  const auto& c = case8();
  SimOptions o;
  o.sched.maxSteps = 10;
  EXPECT_THROW(run_pipeline(lower(c.ir, Variant::SmartCache), c.init, 5, o), NonTermination);
}

TEST(Simulate, ReportJson) {
  const auto& c = case8();
  auto r = run_pipeline(lower(c.ir, Variant::Channelized), c.init, 2);
  const std::string j = r.report.to_json();
  for (const char* key : {"\"perKernel\"", "\"totals\"", "\"channels\"", "\"accessUnit\""}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}
