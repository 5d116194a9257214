#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "corpus.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("streamfort_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Run sfc(const std::string& args) {
  static int n = 0;
  auto log = fs::temp_directory_path() / ("streamfort_cli_out_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
  const std::string cmd = std::string(SFC_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = sftest::slurp(log.string());
  fs::remove(log);
  return r;
}

std::string corpus_args() {
  std::string s;
  for (const auto& f : sftest::corpus_files()) s += " " + f;
  return s;
}

std::string config(const std::string& name) { return sftest::corpus_dir() + "/sw2d/experiments/" + name; }

}  // namespace

TEST(Cli, RefactorRemovesCommonBlocks) {
  auto dir = scratch("refactor");
  auto r = sfc("refactor" + corpus_args() + " --out " + dir.string() + " --emit-report");
  ASSERT_EQ(r.code, 0) << r.out;
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".f95") continue;
    ++files;
    std::string text = sftest::slurp(e.path().string());
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
    EXPECT_EQ(text.find("common"), std::string::npos) << e.path();
  }
  EXPECT_EQ(files, 4);
  auto report = nlohmann::json::parse(sftest::slurp((dir / "refactor-report.json").string()));
  EXPECT_TRUE(report.contains("commonVarsPromoted"));
  fs::remove_all(dir);
}

TEST(Cli, RefactorIsDeterministic) {
  auto a = scratch("det_a");
  auto b = scratch("det_b");
  ASSERT_EQ(sfc("refactor" + corpus_args() + " --out " + a.string()).code, 0);
  ASSERT_EQ(sfc("refactor" + corpus_args() + " --out " + b.string()).code, 0);
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(sftest::slurp(e.path().string()), sftest::slurp((b / e.path().filename()).string())) << e.path();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, RefactorOutputCompilesAgain) {
  auto dir = scratch("again");
  ASSERT_EQ(sfc("refactor" + corpus_args() + " --out " + dir.string()).code, 0);
  std::string inputs;
  for (const auto& e : fs::directory_iterator(dir)) inputs += " " + e.path().string();
  auto r = sfc("analyze" + inputs);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("dyn "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("update "), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(sfc("refactor --out /tmp/x").code, 2);
  EXPECT_EQ(sfc("frobnicate").code, 2);
  EXPECT_EQ(sfc("compare --config " + config("small_16x16.json") + " --variants gpu").code, 2);
  EXPECT_EQ(sfc("analyze /nonexistent/file.f").code, 2);
}

TEST(Cli, SourceErrorsReportLocation) {
  auto dir = scratch("bad");
  {
    std::ofstream f(dir / "bad.f");
    f << sftest::fixed({"program p", "x = (1.0", "end"});
  }
  auto r = sfc("analyze " + (dir / "bad.f").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.f:2:"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, ComparePasses) {
  auto r = sfc("compare --config " + config("small_16x16.json") + " --variants baseline,channelized,smartcache");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(Cli, CompareJson) {
  auto dir = scratch("cmpjson");
  auto r = sfc("compare --config " + config("small_16x16.json") + " --variants smartcache --json --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(sftest::slurp((dir / "compare.json").string()));
  EXPECT_TRUE(j.dump().find("smartcache") != std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MetricsShowTheReduction) {
  auto dir = scratch("metrics");
  auto r = sfc("metrics --config " + config("streaming_64x64.json") + " --json --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(sftest::slurp((dir / "metrics.json").string()));
  const auto& v = j.at("variants");
  EXPECT_EQ(v.at("baseline").at("globalAccesses").get<std::int64_t>(), 1474560);
  EXPECT_LT(v.at("smartcache").at("ratioToBaseline").get<double>(), 0.5);
  EXPECT_LT(v.at("baseline").at("transferBytesMinimal").get<std::int64_t>(),
            v.at("baseline").at("transferBytesEverything").get<std::int64_t>());
  fs::remove_all(dir);
}

TEST(Cli, CompileWritesKernels) {
  auto dir = scratch("compile");
  auto r = sfc("compile --config " + config("small_16x16.json") + " --variant smartcache --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "graph_smartcache.json"));
  EXPECT_TRUE(fs::exists(dir / "dyn_smartcache.clk"));
  EXPECT_TRUE(fs::exists(dir / "transfers_smartcache.json"));
  fs::remove_all(dir);
}

TEST(Cli, SimulateWritesFields) {
  auto dir = scratch("simulate");
  auto r = sfc("simulate --config " + config("small_16x16.json") + " --variant channelized --sched random:3" +
               " --capacity 1 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "eta.bin"));
  EXPECT_TRUE(fs::exists(dir / "eta.hdr"));
  fs::remove_all(dir);
}
