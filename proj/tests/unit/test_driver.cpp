#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "corpus.hpp"
#include "streamfort/driver.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/sw2d.hpp"

using namespace sf;

TEST(DiffFields, IdenticalStates) {
  auto h = sw2d::to_host(sw2d::run_reference(sftest::grid(6, 6, 2), 2));
  for (const auto& d : diff_fields(h, h, sw2d::live_fields())) {
    EXPECT_TRUE(d.present);
    EXPECT_EQ(d.maxAbs, 0.0);
    EXPECT_EQ(d.maxUlp, 0);
    EXPECT_EQ(d.mismatches, 0);
  }
}

TEST(DiffFields, CountsUlpsAndMismatches) {
  auto a = sw2d::to_host(sw2d::run_reference(sftest::grid(6, 6, 2), 2));
  auto b = a;
  Field& eta = b.at("eta");
  eta.set(10, Value::real(std::nextafter(eta.real_at(10), 10.0F)));
  eta.set(11, Value::real(eta.real_at(11) + 0.5F));
  b.at("wet").set(3, Value::integer(7));
  b.erase("u");
  auto diffs = diff_fields(a, b, {"eta", "wet", "u"});
  ASSERT_EQ(diffs.size(), 3U);
  EXPECT_EQ(diffs[0].name, "eta");
  EXPECT_EQ(diffs[0].mismatches, 2);
  EXPECT_NEAR(diffs[0].maxAbs, 0.5, 1e-6);
  EXPECT_GT(diffs[0].maxUlp, 1);
  EXPECT_EQ(diffs[1].mismatches, 1);
  EXPECT_EQ(diffs[1].maxUlp, 7);
  EXPECT_FALSE(diffs[2].present);
}

TEST(LoadSources, FreeAndFixedForm) {
  auto dir = std::filesystem::temp_directory_path() / "streamfort_load";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "p.f95");
    f << "program p\n  real :: x\n  x = 1.0\n  call s(x)\nend program p\n";
    std::ofstream g(dir / "s.f");
    g << sftest::fixed({"subroutine s(y)", "y = y + 1.0", "end"});
  }
  auto ast = load_sources({(dir / "p.f95").string(), (dir / "s.f").string()});
  EXPECT_EQ(ast.units.size(), 2U);
  EXPECT_THROW(load_sources({(dir / "missing.f").string()}), Error);
  std::filesystem::remove_all(dir);
}

TEST(AnalyzeProgram, OverridesResizeTheGrid) {
  auto ir = analyze_program(sftest::corpus_ast(), {{"nx", 12}, {"ny", 5}, {"nt", 9}});
  EXPECT_EQ(ir.timeSteps, 9);
  EXPECT_EQ(ir.shape_of("eta"), (Shape{{0, 0}, {6, 13}}));
}
