#include <gtest/gtest.h>

#include <random>

#include "corpus.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/pipeline.hpp"

using namespace sf;

namespace {

const FunctionalIR& ir16() {
  static const FunctionalIR ir = sftest::corpus_ir(sftest::grid(16, 16, 4));
  return ir;
}

int count_kind(const PipelineGraph& g, ProcessKind k) {
  int n = 0;
  for (const auto& x : g.kernels) n += x.kind == k ? 1 : 0;
  return n;
}

bool has_port(const PipelineGraph& g, const std::string& proc, const std::string& array, MemDir dir) {
  for (const auto& p : g.memPorts) {
    if (p.process == proc && p.array == array && p.dir == dir) return true;
  }
  return false;
}

}  // namespace

TEST(Lower, BaselineLaunchesEachKernelAlone) {
  auto g = lower(ir16(), Variant::Baseline);
  EXPECT_EQ(count_kind(g, ProcessKind::Compute), 3);
  EXPECT_TRUE(g.channels.empty());
  EXPECT_TRUE(g.smartCaches.empty());
  EXPECT_EQ(g.launch_groups(),
            (std::vector<std::vector<std::string>>{{"dyn"}, {"shapiro"}, {"update"}}));
  ASSERT_EQ(g.hostPlan.size(), 3U);
  EXPECT_EQ(g.hostPlan[0].kind, HostOpKind::TransferToDev);
  EXPECT_EQ(g.hostPlan[1].kind, HostOpKind::TimeLoop);
  EXPECT_EQ(g.hostPlan[1].count, 4);
  EXPECT_EQ(g.hostPlan[2].kind, HostOpKind::TransferToHost);
  for (const auto& k : g.kernels) {
    for (const auto& in : k.inputs) EXPECT_EQ(in.source, InputSource::Memory);
    for (const auto& o : k.outputs) EXPECT_TRUE(o.toMemory);
  }
  g.validate();
}

TEST(Lower, ChannelizedStreamsBetweenKernels) {
  auto g = lower(ir16(), Variant::Channelized);
  EXPECT_GE(g.channels.size(), 2U);
  EXPECT_EQ(g.launch_groups(), (std::vector<std::vector<std::string>>{{"dyn", "shapiro", "update"}}));
  // Stencil consumers of a streamed array still read neighbours from memory.
  EXPECT_TRUE(has_port(g, "dyn", "etan", MemDir::Write));
  EXPECT_TRUE(has_port(g, "shapiro", "etan", MemDir::Read));
  const KernelNode* up = g.kernel("update");
  ASSERT_NE(up, nullptr);
  int streamed = 0;
  for (const auto& in : up->inputs) streamed += in.source == InputSource::Channel ? 1 : 0;
  EXPECT_GE(streamed, 3);
  for (const auto& a : {"eta", "h", "u", "v", "wet"}) {
    EXPECT_NE(std::find(g.recirculated.begin(), g.recirculated.end(), a), g.recirculated.end()) << a;
  }
  g.validate();
}

TEST(Lower, SmartCacheOffsetsForTheFivePointStencil) {
  const std::int64_t n = 16;
  auto g = lower(ir16(), Variant::SmartCache);
  const SmartCacheSpec* sc = g.cache("sc_eta_dyn");
  ASSERT_NE(sc, nullptr);
  EXPECT_EQ(sc->offsets, (std::vector<std::int64_t>{-(n + 2), -1, 0, 1, n + 2}));
  EXPECT_EQ(sc->mpOff, n + 2);
  EXPECT_EQ(sc->mnOff, n + 2);
  EXPECT_EQ(sc->bufferLen, 2 * (n + 2) + 1);
  EXPECT_EQ(sc->size, (n + 2) * (n + 2));
  EXPECT_EQ(sc->rowStride, n + 2);
  EXPECT_EQ(g.smartCaches.size(), 6U);
  // Every cache feeding one kernel emits in lockstep.
  for (const auto& c : g.smartCaches) {
    std::int64_t m = 0;
    for (const auto& d : g.smartCaches) {
      if (d.consumer == c.consumer) m = std::max(m, d.mpOff);
    }
    EXPECT_EQ(c.mpOff + c.alignDelay, m) << c.streamId;
  }
  g.validate();
}

TEST(Lower, SmartCacheComputeKernelsTouchNoMemory) {
  auto g = lower(ir16(), Variant::SmartCache);
  EXPECT_EQ(count_kind(g, ProcessKind::MemRead), 1);
  EXPECT_EQ(count_kind(g, ProcessKind::MemWrite), 1);
  for (const auto& p : g.memPorts) {
    EXPECT_TRUE(p.process == "mem_read" || p.process == "mem_write") << p.process;
  }
  for (const auto& k : g.kernels) {
    if (k.kind != ProcessKind::Compute) continue;
    for (const auto& in : k.inputs) EXPECT_EQ(in.source, InputSource::Channel) << k.name;
    for (const auto& o : k.outputs) EXPECT_FALSE(o.toMemory) << k.name;
  }
  EXPECT_EQ(g.channels.size(), 39U);
}

TEST(SmartCacheSpec, BufferLengthFormula) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::int64_t> offs{0};
    const int extra = static_cast<int>(rng() % 8);
    for (int i = 0; i < extra; ++i) offs.push_back(static_cast<std::int64_t>(rng() % 401) - 200);
    auto s = SmartCacheSpec::make("s", 1000, offs);
    const auto [lo, hi] = std::minmax_element(offs.begin(), offs.end());
    EXPECT_EQ(s.bufferLen, *hi - *lo + 1);
    EXPECT_EQ(s.mpOff, std::max<std::int64_t>(*hi, 0));
    EXPECT_EQ(s.mnOff, -std::min<std::int64_t>(*lo, 0));
    EXPECT_TRUE(std::is_sorted(s.offsets.begin(), s.offsets.end()));
    EXPECT_EQ(std::adjacent_find(s.offsets.begin(), s.offsets.end()), s.offsets.end());
  }
}

TEST(SmartCacheSpec, CentreRequired) {
  EXPECT_THROW(SmartCacheSpec::make("s", 10, {-1, 1}), LoweringError);
  EXPECT_NO_THROW(SmartCacheSpec::make("s", 10, {-1, 1}, true));
  EXPECT_THROW(SmartCacheSpec::make("s", 0, {0}), LoweringError);
}

TEST(Lower, BudgetExceeded) {
  LowerOptions o;
  o.budget = 20;
  try {
    lower(ir16(), Variant::SmartCache, o);
    FAIL() << "fit a 37-element buffer into 20";
  } catch (const BudgetExceeded& e) {
    EXPECT_EQ(e.bufferLen(), 37);
    EXPECT_EQ(e.budget(), 20);
  }
  o.budget = 37;
  EXPECT_NO_THROW(lower(ir16(), Variant::SmartCache, o));
  // Baseline never buffers.
  o.budget = 1;
  EXPECT_NO_THROW(lower(ir16(), Variant::Baseline, o));
}

TEST(Lower, OffsetBeyondTheRowIsRejected) {
  auto ir = build_ir(sftest::link_text(sftest::fixed({"program p", "real a(0:5,0:5), b(0:5,0:5)", "do 100 it=1,2",
                                                      "do 10 j=1,4", "do 10 k=1,4", "b(j,k) = a(j,k+6)",
                                                      "#10 continue", "#100 continue", "end"})));
  EXPECT_THROW(lower(ir, Variant::SmartCache), NonLinearizableStencil);
}

TEST(Lower, ValidateCatchesDanglingChannels) {
  auto g = lower(ir16(), Variant::Channelized);
  g.channels.push_back(ChannelEdge{"orphan", {"dyn", "x"}, {"update", "y"}, 4, 0, BaseType::Real, "eta"});
  EXPECT_THROW(g.validate(), LoweringError);
  auto b = lower(ir16(), Variant::Baseline);
  b.channels.push_back(ChannelEdge{"c", {"dyn", "x"}, {"update", "y"}, 4, 0, BaseType::Real, "eta"});
  EXPECT_THROW(b.validate(), LoweringError);
}

TEST(Lower, CapacityAndSkew) {
  auto g = lower(ir16(), Variant::SmartCache);
  auto before = g.channels;
  set_capacity(g, 1);
  for (std::size_t i = 0; i < g.channels.size(); ++i) {
    EXPECT_EQ(g.channels[i].capacity, 1);
    EXPECT_EQ(g.channels[i].skew, before[i].skew);
    EXPECT_GE(g.channels[i].skew, 0);
  }
}

TEST(Lower, Deterministic) {
  EXPECT_EQ(lower(ir16(), Variant::SmartCache).to_json(), lower(ir16(), Variant::SmartCache).to_json());
  EXPECT_EQ(parse_variant("smartcache"), Variant::SmartCache);
  EXPECT_EQ(parse_variant("fpga"), std::nullopt);
}
