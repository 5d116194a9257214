#include <gtest/gtest.h>

#include <filesystem>

#include "corpus.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"
#include "streamfort/interp.hpp"
#include "streamfort/refactor.hpp"

using namespace sf;
using sftest::fixed;
using sftest::link_text;

namespace {

std::optional<Intent> intent_of(const ProgramAst& ast, const std::string& unit, const std::string& arg) {
  const Decl* d = ast.find_unit(unit)->find_decl(arg);
  return d ? d->intent : std::nullopt;
}

bool has_common(const ProgramAst& ast) {
  for (const auto& u : ast.units) {
    if (!u.commonBlocks.empty()) return true;
  }
  return false;
}

int count_loops(const std::vector<Stmt>& body, bool labelled) {
  int n = 0;
  for_each_stmt(body, [&](const Stmt& s) {
    if (s.kind == StmtKind::Do && (s.doLabel != 0) == labelled) ++n;
  });
  return n;
}

const ProgramAst& refactored_corpus() {
  static const ProgramAst ast = refactor_all(sftest::corpus_ast());
  return ast;
}

}  // namespace

TEST(ExplicitTypes, DefaultRuleByFirstLetter) {
  RefactorReport r;
  auto ast = make_types_explicit(link_text(fixed({"program p", "real a(4)", "do 10 j=1,4", "eta = a(j)", "#10 continue", "end"})), &r);
  const SourceUnit& p = ast.program();
  EXPECT_TRUE(p.implicitNone);
  ASSERT_NE(p.find_decl("j"), nullptr);
  EXPECT_EQ(p.find_decl("j")->type, BaseType::Integer);
  ASSERT_NE(p.find_decl("eta"), nullptr);
  EXPECT_EQ(p.find_decl("eta")->type, BaseType::Real);
  EXPECT_EQ(r.implicitDeclsAdded.size(), 2U);
}

TEST(ExplicitTypes, UndeclaredUnderImplicitNone) {
  auto ast = link_text(fixed({"program p", "implicit none", "k = 1", "end"}));
  EXPECT_THROW(make_types_explicit(ast), ConflictingDeclaration);
}

TEST(ExplicitTypes, EveryUnitGetsImplicitNone) {
  auto ast = make_types_explicit(sftest::corpus_ast());
  for (const auto& u : ast.units) {
    EXPECT_TRUE(u.implicitNone) << u.name;
    for_each_expr_in(u.body, [&](const Expr& e) {
      if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) {
        const Decl* d = u.find_decl(e.name);
        ASSERT_NE(d, nullptr) << u.name << ": " << e.name;
        EXPECT_TRUE(d->type.has_value() || d->paramValue) << u.name << ": " << e.name;
      }
    });
  }
}

TEST(Intents, ReadOnlyWriteOnlyAndBoth) {
  auto ast = infer_intents(make_types_explicit(link_text(fixed(
      {"program p", "real x, y, z", "call s(x, y, z)", "end", "subroutine s(a, b, w)", "real a, b, w", "b = a",
       "w = w + 1.0", "end"}))));
  EXPECT_EQ(intent_of(ast, "s", "a"), Intent::In);
  EXPECT_EQ(intent_of(ast, "s", "b"), Intent::Out);
  EXPECT_EQ(intent_of(ast, "s", "w"), Intent::InOut);
}

TEST(Intents, BranchesAreConservative) {
  auto ast = infer_intents(make_types_explicit(link_text(fixed(
      {"program p", "real x, y", "call s(x, y)", "end", "subroutine s(a, b)", "real a, b", "if (b .gt. 0.0) then",
       "x1 = a", "else", "a = 2.0", "end if", "end"}))));
  EXPECT_EQ(intent_of(ast, "s", "a"), Intent::InOut);
  EXPECT_EQ(intent_of(ast, "s", "b"), Intent::In);
}

TEST(Intents, FollowCallees) {
  auto ast = infer_intents(make_types_explicit(link_text(fixed(
      {"program p", "real x, y", "call outer(x, y)", "end", "subroutine outer(a, b)", "real a, b", "call inner(a, b)",
       "end", "subroutine inner(c, d)", "real c, d", "d = c", "end"}))));
  EXPECT_EQ(intent_of(ast, "outer", "a"), Intent::In);
  EXPECT_EQ(intent_of(ast, "outer", "b"), Intent::Out);
}

TEST(Intents, CorpusDynamics) {
  const auto& ast = refactored_corpus();
  EXPECT_EQ(intent_of(ast, "dyn", "eta"), Intent::In);
  EXPECT_EQ(intent_of(ast, "dyn", "un"), Intent::Out);
  EXPECT_EQ(intent_of(ast, "dyn", "vn"), Intent::Out);
  EXPECT_EQ(intent_of(ast, "update", "wet"), Intent::Out);
  EXPECT_EQ(intent_of(ast, "shapiro", "etaf"), Intent::Out);
  for (const auto& u : ast.units) {
    for (const auto& a : u.args) EXPECT_TRUE(intent_of(ast, u.name, a).has_value()) << u.name << ": " << a;
  }
}

TEST(Intents, SoundAgainstObservedAccesses) {
  const auto& ast = refactored_corpus();
  IntentTrace trace;
  run_program(specialize_parameters(ast, {{"nx", 8}, {"ny", 8}, {"nt", 3}}), &trace);
  ASSERT_FALSE(trace.empty());
  for (const auto& [key, acc] : trace) {
    auto in = intent_of(ast, key.first, key.second);
    ASSERT_TRUE(in.has_value()) << key.first << ": " << key.second;
    if (*in == Intent::In) EXPECT_FALSE(acc.written) << key.first << ": " << key.second;
    if (*in == Intent::Out) EXPECT_FALSE(acc.readBeforeWrite) << key.first << ": " << key.second;
  }
}

TEST(Commons, VariableUsedOnlyInCallee) {
  RefactorReport r;
  auto ast = eliminate_common_blocks(
      make_types_explicit(link_text(fixed({"program main", "real eta(4)", "common /grid/ eta", "call shapiro", "end",
                                           "subroutine shapiro", "real eta(4)", "common /grid/ eta", "eta(1) = 1.0",
                                           "end"}))),
      &r);
  EXPECT_FALSE(has_common(ast));
  const SourceUnit& s = *ast.find_unit("shapiro");
  EXPECT_EQ(s.args, std::vector<std::string>{"eta"});
  ASSERT_NE(ast.program().find_decl("eta"), nullptr);
  const Stmt& call = ast.program().body.at(0);
  ASSERT_EQ(call.kind, StmtKind::Call);
  ASSERT_EQ(call.args.size(), 1U);
  EXPECT_EQ(call.args[0]->name, "eta");
  EXPECT_EQ(r.commonVarsPromoted.at("grid").at("shapiro"), std::vector<std::string>{"eta"});
}

TEST(Commons, ThreadedThroughIntermediateUnits) {
  auto ast = eliminate_common_blocks(make_types_explicit(link_text(fixed(
      {"program main", "call mid", "end", "subroutine mid", "call leaf", "end", "subroutine leaf", "real x",
       "common /c1/ x", "x = 2.0", "end"}))));
  EXPECT_FALSE(has_common(ast));
  EXPECT_EQ(ast.find_unit("mid")->args, std::vector<std::string>{"x"});
  EXPECT_EQ(ast.find_unit("leaf")->args, std::vector<std::string>{"x"});
  auto st = run_program(ast);
  EXPECT_EQ(st.at("x").value().as_real(), 2.0F);
}

TEST(Commons, AppendedAfterExistingArguments) {
  auto ast = eliminate_common_blocks(make_types_explicit(link_text(fixed(
      {"program main", "real q", "call s(q)", "end", "subroutine s(a)", "real a, y, z", "common /b1/ y", "common /b2/ z",
       "a = y + z", "end"}))));
  EXPECT_EQ(ast.find_unit("s")->args, (std::vector<std::string>{"a", "y", "z"}));
}

TEST(Commons, UnusedVariablesAreDroppedAndReported) {
  RefactorReport r;
  auto ast = eliminate_common_blocks(
      make_types_explicit(link_text(fixed({"program main", "call s", "end", "subroutine s", "real a, b",
                                           "common /blk/ a, b", "a = 1.0", "end"}))),
      &r);
  EXPECT_EQ(ast.find_unit("s")->args, std::vector<std::string>{"a"});
  EXPECT_EQ(r.commonVarsDropped.at("blk"), std::vector<std::string>{"b"});
}

TEST(Commons, ClashWithLocalIsRenamed) {
  RefactorReport r;
  auto ast = eliminate_common_blocks(
      make_types_explicit(link_text(fixed({"program main", "real x", "x = 5.0", "call s", "end", "subroutine s",
                                           "real x", "common /blk/ x", "x = 1.0", "end"}))),
      &r);
  EXPECT_EQ(r.nameClashes.size(), 1U);
  EXPECT_FALSE(has_common(ast));
  auto st = run_program(ast);
  EXPECT_EQ(st.at("x").value().as_real(), 5.0F);
}

TEST(Commons, CorpusHasNoneLeftAndEveryVariableAccounted) {
  RefactorReport r;
  auto ast = refactor_all(sftest::corpus_ast(), &r);
  EXPECT_FALSE(has_common(ast));
  std::set<std::string> seen;
  for (const auto& [block, units] : r.commonVarsPromoted) {
    for (const auto& [unit, vars] : units) seen.insert(vars.begin(), vars.end());
  }
  for (const auto& [block, vars] : r.commonVarsDropped) seen.insert(vars.begin(), vars.end());
  for (const char* v : {"eta", "etan", "etaf", "h", "h0", "wet", "u", "v", "un", "vn"}) EXPECT_TRUE(seen.count(v)) << v;
}

TEST(Modules, OnePerSubprogramWithOnlyLists) {
  auto ast = modularize_units(eliminate_common_blocks(make_types_explicit(link_text(fixed(
      {"program main", "call dyn", "end", "subroutine dyn", "end", "subroutine lonely", "end"})))));
  EXPECT_EQ(ast.find_unit("dyn")->moduleName, "module_dyn");
  EXPECT_EQ(ast.find_unit("lonely")->moduleName, "module_lonely");
  ASSERT_EQ(ast.program().uses.size(), 1U);
  EXPECT_EQ(ast.program().uses[0].module, "module_dyn");
  EXPECT_EQ(ast.program().uses[0].only, std::vector<std::string>{"dyn"});
}

TEST(Loops, LabelledBecomeStructured) {
  RefactorReport r;
  auto ast = normalize_loops(link_text(fixed({"program p", "real a(4,4)", "do 10 j=1,4", "do 10 k=4,1,-1",
                                              "a(j,k) = 1.0", "#10 continue", "end"})),
                             &r);
  const auto& body = ast.program().body;
  EXPECT_EQ(count_loops(body, true), 0);
  EXPECT_EQ(count_loops(body, false), 2);
  EXPECT_EQ(r.loopsNormalized, 2);
  const Stmt* outer = &body.at(0);
  ASSERT_EQ(outer->kind, StmtKind::Do);
  ASSERT_EQ(outer->body.size(), 1U);
  const Stmt& inner = outer->body[0];
  ASSERT_EQ(inner.kind, StmtKind::Do);
  ASSERT_NE(inner.step, nullptr);
  auto st = run_program(ast);
  for (Word w : st.at("a").data) EXPECT_EQ(std::bit_cast<float>(w), 1.0F);
}

TEST(Emit, CorpusText) {
  auto files = emit_f95(refactored_corpus());
  ASSERT_EQ(files.size(), 4U);
  for (const auto& [name, text] : files) {
    EXPECT_EQ(name.substr(name.size() - 4), ".f95");
    EXPECT_EQ(text.find("common"), std::string::npos) << name;
    EXPECT_NE(text.find("implicit none"), std::string::npos) << name;
  }
  for (const auto& u : refactored_corpus().units) {
    const std::string& text = files.at(std::filesystem::path(u.path).stem().string() + ".f95");
    for (const auto& a : u.args) {
      bool found = false;
      std::istringstream lines(text);
      for (std::string l; std::getline(lines, l);) {
        if (l.find(":: " + a + "(") != std::string::npos || l.size() >= a.size() + 3 && l.ends_with(":: " + a)) {
          found = found || l.find("intent(") != std::string::npos;
        }
      }
      EXPECT_TRUE(found) << u.name << ": " << a;
    }
  }
}

TEST(Emit, Deterministic) {
  auto a = emit_f95(refactor_all(sftest::corpus_ast()));
  auto b = emit_f95(refactor_all(sftest::corpus_ast()));
  EXPECT_EQ(a, b);
}

TEST(Emit, FreeFormReadsBack) {
  const auto& ast = refactored_corpus();
  std::vector<SourceUnit> units;
  for (const auto& [name, text] : emit_f95(ast)) {
    for (auto& u : parse_free_form(text, name)) units.push_back(std::move(u));
  }
  auto back = link_units(std::move(units));
  for (const auto& u : ast.units) {
    const SourceUnit* v = back.find_unit(u.name);
    ASSERT_NE(v, nullptr) << u.name;
    EXPECT_TRUE(equal(u.body, v->body)) << u.name;
    EXPECT_EQ(u.args, v->args) << u.name;
  }
  auto s = specialize_parameters(back, {{"nx", 6}, {"ny", 6}, {"nt", 4}});
  auto t = specialize_parameters(sftest::corpus_ast(), {{"nx", 6}, {"ny", 6}, {"nt", 4}});
  EXPECT_EQ(run_program(s).at("eta"), run_program(t).at("eta"));
}

TEST(Refactor, Idempotent) {
  const auto& once = refactored_corpus();
  auto twice = refactor_all(once);
  EXPECT_TRUE(equal(once, twice));
}

TEST(Refactor, PreservesSemanticsBitExactly) {
  const std::map<std::string, double> small{{"nx", 16}, {"ny", 16}, {"nt", 20}};
  auto before = run_program(specialize_parameters(sftest::corpus_ast(), small));
  auto after = run_program(specialize_parameters(refactored_corpus(), small));
  for (const char* n : {"eta", "h", "u", "v", "wet", "h0", "etasum"}) {
    ASSERT_TRUE(before.count(n) && after.count(n)) << n;
    EXPECT_EQ(before.at(n), after.at(n)) << n;
  }
}
