#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "corpus.hpp"
#include "streamfort/analyzer.hpp"
#include "streamfort/elemental.hpp"

using namespace sf;

namespace {

std::vector<std::vector<std::int64_t>> positions(const Domain& d) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> idx = d.lo;
  while (true) {
    out.push_back(idx);
    std::size_t k = idx.size();
    while (k-- > 0) {
      if (++idx[k] <= d.hi[k]) break;
      idx[k] = d.lo[k];
    }
    if (k == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

/// Applies the elemental at every position of `order`, reading from a
/// snapshot of `before` and writing into a copy.
HostState apply(const Elemental& e, const HostState& before,
                const std::vector<std::vector<std::int64_t>>& order) {
  HostState after = before;
  std::vector<Value> scalars;
  for (const auto& s : e.scalar_inputs()) scalars.push_back(before.at(s).value());
  std::vector<Value> in(e.reads().size());
  std::vector<Value> out(e.writes().size());
  for (const auto& idx : order) {
    for (std::size_t r = 0; r < in.size(); ++r) {
      const auto& rd = e.reads()[r];
      const Field& f = before.at(rd.array);
      std::vector<std::int64_t> at(idx.size());
      for (std::size_t d = 0; d < idx.size(); ++d) at[d] = idx[d] + rd.offset[d];
      in[r] = f.at(f.shape.linear(at));
    }
    e.run(idx, in, scalars, out);
    for (std::size_t w = 0; w < out.size(); ++w) {
      Field& f = after.at(e.writes()[w]);
      f.set(f.shape.linear(idx), out[w]);
    }
  }
  return after;
}

}  // namespace

TEST(Elemental, CorpusNodesAgreeWithEvaluatorInAnyOrder) {
  auto ir = sftest::corpus_ir(sftest::grid(9, 7, 3));
  HostState st = run_ir(ir, 2);
  std::mt19937 rng(5);
  for (const auto& node : ir.nodes) {
    ASSERT_EQ(node.kind, NodeKind::Map);
    Elemental e = Elemental::compile(node);
    HostState expect = st;
    run_node(ir, node, expect);
    auto order = positions(node.domain);
    EXPECT_EQ(apply(e, st, order), expect) << node.name;
    std::reverse(order.begin(), order.end());
    EXPECT_EQ(apply(e, st, order), expect) << node.name << " reversed";
    std::shuffle(order.begin(), order.end(), rng);
    EXPECT_EQ(apply(e, st, order), expect) << node.name << " shuffled";
    run_node(ir, node, st);
  }
}

TEST(Elemental, ReadsListTheStencil) {
  auto ir = sftest::corpus_ir(sftest::grid(8, 8, 1));
  Elemental e = Elemental::compile(ir.nodes[0]);
  int eta = 0;
  for (const auto& r : e.reads()) eta += r.array == "eta" ? 1 : 0;
  EXPECT_EQ(eta, 5);
  EXPECT_EQ(e.loop_vars(), (std::vector<std::string>{"j", "k"}));
  EXPECT_FALSE(e.is_fold());
}

TEST(Elemental, ConditionalOutputPassesPriorValue) {
  auto ast = sftest::link_text(sftest::fixed(
      {"program p", "real a(4), b(4)", "do 10 i=1,4", "if (a(i) .gt. 0.0) b(i) = a(i)", "#10 continue", "end"}));
  auto ir = build_ir(ast);
  ASSERT_EQ(ir.nodes.size(), 1U);
  Elemental e = Elemental::compile(ir.nodes[0]);
  ASSERT_EQ(e.writes(), std::vector<std::string>{"b"});
  EXPECT_FALSE(e.must_write(0));
  // a at offset 0 plus the prior value of b.
  ASSERT_EQ(e.reads().size(), 2U);
  std::vector<std::int64_t> idx{1};
  std::vector<Value> out(1);
  std::vector<Value> in(2);
  for (std::size_t r = 0; r < 2; ++r) {
    in[r] = e.reads()[r].array == "a" ? Value::real(-1.0F) : Value::real(7.0F);
  }
  e.run(idx, in, {}, out);
  EXPECT_EQ(out[0].as_real(), 7.0F);
}

TEST(Elemental, FoldAccumulates) {
  auto ast = sftest::link_text(sftest::fixed(
      {"program p", "real a(5)", "s = 0.0", "do 10 i=1,5", "s = s + a(i)*a(i)", "#10 continue", "end"}));
  auto ir = build_ir(ast);
  const IrNode* fold = nullptr;
  for (const auto& n : ir.nodes) {
    if (n.kind == NodeKind::Fold) fold = &n;
  }
  ASSERT_NE(fold, nullptr);
  Elemental e = Elemental::compile(*fold);
  ASSERT_TRUE(e.is_fold());
  Value acc = Value::real(0.0F);
  float expect = 0.0F;
  for (int i = 1; i <= 5; ++i) {
    std::vector<std::int64_t> idx{i};
    std::vector<Value> in{Value::real(0.5F * static_cast<float>(i))};
    e.run(idx, in, {}, {}, &acc);
    expect = expect + (0.5F * static_cast<float>(i)) * (0.5F * static_cast<float>(i));
  }
  EXPECT_EQ(acc.as_real(), expect);
}
