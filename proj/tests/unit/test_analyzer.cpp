#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "corpus.hpp"
#include "streamfort/analyzer.hpp"
#include "streamfort/interp.hpp"

using namespace sf;
using sftest::fixed;
using sftest::link_text;

namespace {

NestAnalysis classify(const std::vector<std::string>& lines) {
  static std::vector<ProgramAst> keep;
  keep.push_back(link_text(fixed(lines)));
  const SourceUnit& p = keep.back().program();
  for (const auto& s : p.body) {
    if (s.kind == StmtKind::Do) return classify_loop_nest(p, s);
  }
  throw std::runtime_error("no loop");
}

const AccessPattern* access(const NestAnalysis& a, const std::string& array, bool write) {
  for (const auto& p : a.accesses) {
    if (p.array == array && p.write == write) return &p;
  }
  return nullptr;
}

std::vector<Offset> offsets_of(const IrNode& n, const std::string& array) {
  const AccessPattern* p = n.input(array);
  return p ? p->offsets : std::vector<Offset>{};
}

const std::vector<Offset> kFivePoint{{-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}};
const std::vector<Offset> kCentre{{0, 0}};

bool has_edge(const FunctionalIR& ir, const std::string& from, const std::string& to, const std::string& array) {
  for (const auto& e : ir.edges) {
    if (ir.nodes[static_cast<std::size_t>(e.from)].name == from && ir.nodes[static_cast<std::size_t>(e.to)].name == to &&
        e.array == array) {
      return true;
    }
  }
  return false;
}

/// Random 1-D program: `a` set up by the host, then two loops in a time loop.
std::vector<std::string> chain_program(const std::string& first, const std::string& second) {
  return {"program p",
          "integer n",
          "parameter (n = 8)",
          "real a(0:n+1), b(0:n+1), c(0:n+1)",
          "do 5 i=0,n+1",
          "a(i) = mod(i*37, 11) - 5.0",
          "#5 continue",
          "do 100 it=1,3",
          "do 10 i=1,n",
          first,
          "#10 continue",
          "do 20 i=1,n",
          second,
          "#20 continue",
          "do 30 i=1,n",
          "a(i) = c(i)",
          "#30 continue",
          "#100 continue",
          "end"};
}

}  // namespace

TEST(Classify, StencilMap) {
  auto a = classify({"program p", "real eta(0:9,0:9), etan(0:9,0:9), u(0:9,0:9), v(0:9,0:9)", "do 10 j=1,8",
                     "do 10 k=1,8",
                     "x = eta(j-1,k) + eta(j+1,k) + eta(j,k-1) + eta(j,k+1)", "etan(j,k) = x + u(j,k) + v(j,k)",
                     "#10 continue", "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Map);
  ASSERT_NE(access(a, "eta", false), nullptr);
  EXPECT_EQ(access(a, "eta", false)->offsets, (std::vector<Offset>{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}));
  EXPECT_EQ(access(a, "etan", true)->offsets, kCentre);
  EXPECT_EQ(a.loopVars, (std::vector<std::string>{"j", "k"}));
}

TEST(Classify, ScalarReductionIsFold) {
  auto a = classify({"program p", "real eta(8,8)", "s = 0.0", "do 10 j=1,8", "do 10 k=1,8", "s = s + eta(j,k)",
                     "#10 continue", "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Fold);
  EXPECT_EQ(a.cls.accumulator, "s");
  EXPECT_EQ(a.cls.op, FoldOp::Add);
}

TEST(Classify, MaxReduction) {
  auto a = classify({"program p", "real eta(8)", "do 10 j=1,8", "s = max(s, eta(j))", "#10 continue", "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Fold);
  EXPECT_EQ(a.cls.op, FoldOp::Max);
}

TEST(Classify, CarriedDependenceIsSequential) {
  auto a = classify({"program p", "real a(8)", "do 10 j=2,8", "a(j) = a(j-1) + 1.0", "#10 continue", "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Sequential);
  EXPECT_NE(a.cls.reason.find('a'), std::string::npos) << a.cls.reason;
}

TEST(Classify, NonAffineSubscriptIsSequential) {
  auto a = classify({"program p", "real a(16), b(16)", "do 10 j=1,8", "b(2*j) = a(j)", "#10 continue", "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Sequential);
  EXPECT_TRUE(access(a, "b", true)->opaque);
}

TEST(Classify, PrivateScalarsDoNotBlock) {
  auto a = classify({"program p", "real a(8), b(8)", "do 10 j=1,8", "t = a(j)*2.0", "b(j) = t + 1.0", "#10 continue",
                     "end"});
  EXPECT_EQ(a.cls.kind, LoopKind::Map);
  EXPECT_EQ(a.privates, std::vector<std::string>{"t"});
}

TEST(Classify, Deterministic) {
  const std::vector<std::string> src{"program p", "real a(8), b(8)", "do 10 j=2,7", "b(j) = a(j-1) + a(j+1)",
                                     "#10 continue", "end"};
  auto x = classify(src);
  auto y = classify(src);
  EXPECT_EQ(x.cls.kind, y.cls.kind);
  ASSERT_EQ(x.accesses.size(), y.accesses.size());
  for (std::size_t i = 0; i < x.accesses.size(); ++i) EXPECT_EQ(x.accesses[i].offsets, y.accesses[i].offsets);
}

TEST(BuildIr, CorpusHasThreeMapsInAChain) {
  auto ir = build_ir(sftest::corpus_ast());
  ASSERT_EQ(ir.nodes.size(), 3U);
  EXPECT_EQ(ir.nodes[0].name, "dyn");
  EXPECT_EQ(ir.nodes[1].name, "shapiro");
  EXPECT_EQ(ir.nodes[2].name, "update");
  for (const auto& n : ir.nodes) EXPECT_EQ(n.kind, NodeKind::Map) << n.name;
  EXPECT_TRUE(has_edge(ir, "dyn", "shapiro", "etan"));
  EXPECT_TRUE(has_edge(ir, "shapiro", "update", "etaf"));
  EXPECT_TRUE(has_edge(ir, "dyn", "update", "un"));
  EXPECT_TRUE(ir.hasTimeLoop);
  EXPECT_EQ(ir.timeSteps, 100);
}

TEST(BuildIr, CorpusStencils) {
  auto ir = build_ir(sftest::corpus_ast());
  const IrNode& dyn = ir.nodes[0];
  EXPECT_EQ(offsets_of(dyn, "eta"), kFivePoint);
  EXPECT_EQ(offsets_of(dyn, "h"), kFivePoint);
  EXPECT_EQ(offsets_of(dyn, "u"), (std::vector<Offset>{{0, -1}, {0, 0}}));
  EXPECT_EQ(offsets_of(dyn, "v"), (std::vector<Offset>{{-1, 0}, {0, 0}}));
  const IrNode& sh = ir.nodes[1];
  EXPECT_EQ(offsets_of(sh, "etan"), kFivePoint);
  EXPECT_EQ(offsets_of(sh, "wet"), (std::vector<Offset>{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}));
  const IrNode& up = ir.nodes[2];
  for (const auto& in : up.inputs) EXPECT_EQ(in.offsets, kCentre) << in.array;
  EXPECT_EQ(dyn.domain, (Domain{{1, 1}, {32, 32}}));
}

TEST(BuildIr, MatchesCommittedGolden) {
  auto ir = analyze_program(sftest::corpus_ast());
  auto golden = nlohmann::json::parse(sftest::slurp(sftest::corpus_dir() + "/sw2d/golden/ir.json"));
  EXPECT_EQ(nlohmann::json::parse(ir.to_json()), golden);
}

TEST(BuildIr, EmptyBody) {
  auto ir = build_ir(link_text(fixed({"program p", "end"})));
  EXPECT_TRUE(ir.nodes.empty());
  EXPECT_TRUE(ir.edges.empty());
}

TEST(BuildIr, SequentialNestKeepsItsPlace) {
  auto ir = build_ir(link_text(fixed({"program p", "real a(0:9), b(0:9), c(0:9)", "do 100 it=1,2", "do 10 i=1,8",
                                      "b(i) = a(i)", "#10 continue", "do 20 i=1,8", "b(i) = b(i-1) + 1.0",
                                      "#20 continue", "do 30 i=1,8", "c(i) = b(i)", "#30 continue", "#100 continue",
                                      "end"})));
  ASSERT_EQ(ir.nodes.size(), 3U);
  EXPECT_EQ(ir.nodes[0].kind, NodeKind::Map);
  EXPECT_EQ(ir.nodes[1].kind, NodeKind::Seq);
  EXPECT_EQ(ir.nodes[2].kind, NodeKind::Map);
}

TEST(BuildIr, EdgeTypesAgree) {
  auto ir = build_ir(sftest::corpus_ast());
  for (const auto& e : ir.edges) EXPECT_EQ(e.type, ir.type_of(e.array)) << e.array;
  for (const auto& e : ir.carried) EXPECT_EQ(e.type, ir.type_of(e.array)) << e.array;
}

TEST(Rewrite, DefaultHeuristicLeavesCorpusAlone) {
  auto ir = analyze_program(sftest::corpus_ast());
  ASSERT_EQ(ir.nodes.size(), 3U);
  EXPECT_EQ(ir.nodes[0].name, "dyn");
  EXPECT_EQ(ir.nodes[1].name, "shapiro");
  EXPECT_EQ(ir.nodes[2].name, "update");
}

TEST(Rewrite, FusesPointwiseMaps) {
  auto base = build_ir(link_text(fixed(chain_program("b(i) = a(i)*2.0", "c(i) = b(i) + 1.0"))));
  ASSERT_EQ(base.nodes.size(), 3U);
  auto fused = rewrite_ir(base);
  EXPECT_LT(fused.nodes.size(), base.nodes.size());
  EXPECT_EQ(run_ir(base).at("a"), run_ir(fused).at("a"));
}

TEST(Rewrite, StencilAfterPointwiseComposesOffsets) {
  auto base = build_ir(link_text(fixed(chain_program("b(i) = a(i)*2.0", "c(i) = b(i-1) + b(i) + b(i+1)"))));
  auto fused = rewrite_ir(base);
  ASSERT_LT(fused.nodes.size(), base.nodes.size());
  const IrNode* g = nullptr;
  for (const auto& n : fused.nodes) {
    if (n.output("c")) g = &n;
  }
  ASSERT_NE(g, nullptr);
  ASSERT_NE(g->input("a"), nullptr);
  EXPECT_EQ(g->input("a")->offsets, (std::vector<Offset>{{-1}, {0}, {1}}));
  EXPECT_EQ(run_ir(base).at("a"), run_ir(fused).at("a"));
}

TEST(Rewrite, TwoStencilsAreNotFused) {
  auto base = build_ir(link_text(fixed(chain_program("b(i) = a(i-1) + a(i+1)", "c(i) = b(i-1) + b(i+1)"))));
  auto out = rewrite_ir(base);
  for (const auto& n : out.nodes) EXPECT_FALSE(n.output("b") && n.output("c")) << n.name;
  EXPECT_EQ(run_ir(base).at("a"), run_ir(out).at("a"));
}

TEST(Rewrite, FissionSplitsAndPreserves) {
  auto base = analyze_program(sftest::corpus_ast(), {{"nx", 6}, {"ny", 6}, {"nt", 4}}, RewriteRules{false, false});
  auto split = rewrite_ir(base, RewriteRules{false, true});
  EXPECT_GT(split.nodes.size(), base.nodes.size());
  auto a = run_ir(base);
  auto b = run_ir(split);
  for (const char* n : {"eta", "h", "u", "v", "wet"}) EXPECT_EQ(a.at(n), b.at(n)) << n;
}

TEST(Rewrite, PreservesSemanticsOnRandomPrograms) {
  // Random pointwise/stencil chains on small grids: rewritten IR agrees with the original.
  std::mt19937 rng(11);
  const std::vector<std::string> firsts{"b(i) = a(i)*2.0", "b(i) = a(i-1) - a(i)", "b(i) = abs(a(i)) + 0.5",
                                        "b(i) = a(i+1)*a(i)"};
  const std::vector<std::string> seconds{"c(i) = b(i) + 1.0", "c(i) = b(i-1) + b(i+1)", "c(i) = b(i)*b(i) - a(i)",
                                         "c(i) = max(b(i), a(i+1))"};
  for (int trial = 0; trial < 16; ++trial) {
    const auto& f = firsts[rng() % firsts.size()];
    const auto& s = seconds[rng() % seconds.size()];
    auto base = build_ir(link_text(fixed(chain_program(f, s))));
    auto out = rewrite_ir(base);
    auto x = run_ir(base);
    auto y = run_ir(out);
    EXPECT_EQ(x.at("a"), y.at("a")) << f << " ; " << s;
  }
}

TEST(RunIr, MatchesInterpreter) {
  auto ast = specialize_parameters(sftest::corpus_ast(), {{"nx", 10}, {"ny", 7}, {"nt", 6}});
  auto ir = analyze_program(ast);
  auto a = run_ir(ir);
  auto b = run_program(ast);
  for (const char* n : {"eta", "h", "u", "v", "wet", "etasum"}) EXPECT_EQ(a.at(n), b.at(n)) << n;
}

TEST(RunIr, FoldKeepsCanonicalOrder) {
  auto ast = link_text(fixed({"program p", "real a(50)", "do 5 i=1,50", "a(i) = 1.0/(i*i) + mod(i, 7)*1.0e-3",
                              "#5 continue", "do 100 it=1,1", "s = 0.0", "do 10 i=1,50", "s = s + a(i)", "#10 continue",
                              "#100 continue", "end"}));
  auto ir = analyze_program(ast);
  bool fold = false;
  for (const auto& n : ir.nodes) fold = fold || n.kind == NodeKind::Fold;
  EXPECT_TRUE(fold);
  float expect = 0.0F;
  for (int i = 1; i <= 50; ++i) expect = expect + (1.0F / static_cast<float>(i * i) + static_cast<float>(i % 7) * 1.0e-3F);
  EXPECT_EQ(run_ir(ir).at("s").value().as_real(), expect);
}
