#include <benchmark/benchmark.h>

#include <filesystem>

#include "streamfort/driver.hpp"
#include "streamfort/pipeline.hpp"
#include "streamfort/refactor.hpp"
#include "streamfort/sim.hpp"
#include "streamfort/sw2d.hpp"

using namespace sf;

namespace {

const ProgramAst& corpus() {
  static const ProgramAst ast = [] {
    std::vector<std::string> files;
    for (const char* f : {"main.f", "dyn.f", "shapiro.f", "update.f"}) {
      files.push_back(std::string(STREAMFORT_CORPUS_DIR) + "/sw2d/" + f);
    }
    return load_sources(files);
  }();
  return ast;
}

FunctionalIR ir_for(int n) {
  sw2d::ModelParams p;
  p.nx = p.ny = n;
  return analyze_program(corpus(), p.overrides());
}

void BM_Refactor(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(refactor_all(corpus()));
}
BENCHMARK(BM_Refactor)->Unit(benchmark::kMillisecond);

void BM_Analyze(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(analyze_program(corpus()));
}
BENCHMARK(BM_Analyze)->Unit(benchmark::kMillisecond);

void BM_Reference(benchmark::State& state) {
  sw2d::ModelParams p;
  p.nx = p.ny = static_cast<int>(state.range(0));
  sw2d::State s = sw2d::initial_state(p);
  for (auto _ : state) sw2d::reference_step(s, p);
  state.SetItemsProcessed(state.iterations() * p.nx * p.ny);
}
BENCHMARK(BM_Reference)->Arg(32)->Arg(64)->Arg(128);

template <Variant V>
void BM_Simulate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  FunctionalIR ir = ir_for(n);
  PipelineGraph g = lower(ir, V);
  HostState init = ir_initial_state(ir);
  std::int64_t accesses = 0;
  for (auto _ : state) {
    SimResult r = run_pipeline(g, init, 1);
    accesses = r.report.totals.global_accesses();
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * n * n);
  state.counters["global_accesses"] = static_cast<double>(accesses);
}
BENCHMARK(BM_Simulate<Variant::Baseline>)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate<Variant::Channelized>)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate<Variant::SmartCache>)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SmartCacheStream(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const std::int64_t row = 66;
  auto spec = SmartCacheSpec::make("sc", n, {-row, -1, 0, 1, row});
  for (auto _ : state) {
    Scheduler s;
    Channel in("in", 64);
    std::vector<std::unique_ptr<Channel>> outs;
    std::vector<Channel*> ptrs;
    for (std::size_t i = 0; i < spec.offsets.size(); ++i) {
      outs.push_back(std::make_unique<Channel>("o", 64));
      ptrs.push_back(outs.back().get());
    }
    s.spawn("feed", [](Scheduler& sch, Channel& c, std::int64_t k) -> Task {
      for (std::int64_t i = 0; i < k; ++i) co_await sch.write(c, static_cast<Word>(i));
      c.close();
    }(s, in, n));
    s.spawn("cache", smart_cache_run(s, spec, in, ptrs));
    s.spawn("sink", [](Scheduler& sch, std::vector<Channel*> cs, std::int64_t k) -> Task {
      for (std::int64_t i = 0; i < k; ++i) {
        for (Channel* c : cs) co_await sch.read(*c);
      }
    }(s, ptrs, n));
    s.run();
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SmartCacheStream)->Arg(66 * 66)->Arg(1 << 16);

}  // namespace

BENCHMARK_MAIN();
