#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "corpus.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/interp.hpp"

using namespace sf;
using sftest::fixed;
using sftest::link_text;

namespace {

HostState run(const std::vector<std::string>& lines) { return run_program(link_text(fixed(lines))); }

float real_of(const HostState& s, const std::string& n) { return s.at(n).value().as_real(); }
std::int32_t int_of(const HostState& s, const std::string& n) { return s.at(n).value().as_int(); }

}  // namespace

TEST(Eval, IntegerDivisionTruncatesTowardZero) {
  auto s = run({"program p", "i = 7/2", "j = -7/2", "k = mod(-7, 2)", "end"});
  EXPECT_EQ(int_of(s, "i"), 3);
  EXPECT_EQ(int_of(s, "j"), -3);
  EXPECT_EQ(int_of(s, "k"), -1);
}

TEST(Eval, AssignmentConversions) {
  auto s = run({"program p", "i = 2.9", "j = -2.9", "x = 3", "end"});
  EXPECT_EQ(int_of(s, "i"), 2);
  EXPECT_EQ(int_of(s, "j"), -2);
  EXPECT_EQ(real_of(s, "x"), 3.0F);
}

TEST(Eval, Intrinsics) {
  auto s = run({"program p", "x = abs(-1.5)", "y = min(3.0, 2.0, 4.0)", "z = max(1, 5)", "w = sqrt(2.0)", "end"});
  EXPECT_EQ(real_of(s, "x"), 1.5F);
  EXPECT_EQ(real_of(s, "y"), 2.0F);
  EXPECT_EQ(real_of(s, "z"), 5.0F);
  EXPECT_EQ(real_of(s, "w"), std::sqrt(2.0F));
}

TEST(Eval, SinglePrecisionArithmetic) {
  auto s = run({"program p", "x = 0.1 + 0.2", "end"});
  EXPECT_EQ(real_of(s, "x"), 0.1F + 0.2F);
}

TEST(Eval, ArgumentsByReference) {
  auto s = run({"program p", "real a(3)", "call fill(a, 3)", "end", "subroutine fill(b, n)", "integer n",
                "real b(3)", "do 10 i=1,n", "b(i) = i", "#10 continue", "end"});
  const Field& a = s.at("a");
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.real_at(i), static_cast<float>(i + 1));
}

TEST(Eval, LocalsStartAtZero) {
  auto s = run({"program p", "call s(x)", "call s(y)", "end", "subroutine s(r)", "t = t + 1.0", "r = t", "end"});
  EXPECT_EQ(real_of(s, "x"), 1.0F);
  EXPECT_EQ(real_of(s, "y"), 1.0F);
}

TEST(Eval, FunctionsReturnValues) {
  auto s = run({"program p", "x = twice(2.5)", "end", "function twice(a)", "twice = 2.0*a", "end"});
  EXPECT_EQ(real_of(s, "x"), 5.0F);
}

TEST(Eval, DoLoopTripCountWithNegativeStep) {
  auto s = run({"program p", "n = 0", "do 10 k=5,1,-2", "n = n + k", "#10 continue", "end"});
  EXPECT_EQ(int_of(s, "n"), 9);
}

TEST(Eval, OutOfBoundsIsAnError) {
  EXPECT_THROW(run({"program p", "real a(2)", "a(3) = 1.0", "end"}), EvalError);
}

TEST(Eval, CommonStorageIsShared) {
  auto s = run({"program p", "real q", "common /b/ q", "call s", "end", "subroutine s", "real r", "common /b/ r",
                "r = 4.0", "end"});
  EXPECT_EQ(real_of(s, "q"), 4.0F);
}

TEST(Eval, ExecHostOverExistingState) {
  auto ast = link_text(fixed({"program p", "real a(2)", "a(1) = a(1) + 1.0", "end"}));
  HostState st;
  st["a"] = Field::array(BaseType::Real, Shape{{1}, {2}});
  st["a"].set(0, Value::real(2.0F));
  exec_host(ast.program(), ast.program().body, st, &ast);
  EXPECT_EQ(st.at("a").real_at(0), 3.0F);
}

TEST(Specialize, OverridesParameters) {
  auto ast = specialize_parameters(
      link_text(fixed({"program p", "integer n", "real d", "parameter (n = 4, d = 0.5)", "real a(n)", "x = d", "a(n) = x", "end"})),
      {{"n", 7}, {"d", 0.25}});
  auto s = run_program(ast);
  EXPECT_EQ(s.at("a").shape.size(), 7);
  EXPECT_EQ(real_of(s, "x"), 0.25F);
}

TEST(RealLiteral, ReadsBackExactly) {
  std::mt19937 rng(42);
  std::uniform_int_distribution<std::uint32_t> bits;
  int checked = 0;
  while (checked < 500) {
    const float f = std::bit_cast<float>(bits(rng));
    if (!std::isfinite(f)) continue;
    const std::string lit = real_literal(f);
    auto ast = link_text(fixed({"program p", "x = " + lit, "end"}));
    EXPECT_EQ(std::bit_cast<std::uint32_t>(real_of(run_program(ast), "x")), std::bit_cast<std::uint32_t>(f)) << lit;
    ++checked;
  }
}

TEST(Ulp, DistanceProperties) {
  EXPECT_EQ(ulp_distance(1.0F, 1.0F), 0);
  EXPECT_EQ(ulp_distance(0.0F, -0.0F), 0);
  EXPECT_EQ(ulp_distance(1.0F, std::nextafter(1.0F, 2.0F)), 1);
  EXPECT_EQ(ulp_distance(-std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::denorm_min()), 2);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(-100.0F, 100.0F);
  for (int i = 0; i < 200; ++i) {
    const float a = d(rng);
    const float b = d(rng);
    EXPECT_EQ(ulp_distance(a, b), ulp_distance(b, a));
  }
}

TEST(Corpus, InterpreterRunsTheModel) {
  auto s = run_program(specialize_parameters(sftest::corpus_ast(), {{"nx", 8}, {"ny", 8}, {"nt", 3}}));
  EXPECT_EQ(s.at("eta").shape, (Shape{{0, 0}, {9, 9}}));
  EXPECT_TRUE(std::isfinite(real_of(s, "etasum")));
  EXPECT_EQ(int_of(s, "n"), 4);
}
