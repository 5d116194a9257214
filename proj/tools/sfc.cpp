#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "streamfort/driver.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"
#include "streamfort/pipeline.hpp"
#include "streamfort/refactor.hpp"
#include "streamfort/sim.hpp"
#include "streamfort/sw2d.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A check the user asked for did not hold (sources rejected, deadlock,
/// results out of tolerance).
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kVariants{"baseline", "channelized", "smartcache"};

struct Options {
  std::vector<std::string> inputs;
  std::string out;
  std::string config;
  std::string variant = "baseline";
  std::vector<std::string> variants = kVariants;
  std::int64_t capacity = 64;
  std::string sched = "rr";
  std::int64_t maxSteps = 4'000'000'000LL;
  std::string dumpReport;
  std::string transfers = "default";
  std::string boundary = "clamp";
  std::int64_t steps = -1;
  std::int64_t toleranceUlp = -1;
  bool emitReport = false;
  bool dumpIr = false;
  bool json = false;
  bool fission = false;
  bool noFuse = false;
};

/// Experiment config plus the sources it names, relative to its own directory.
struct Experiment {
  std::optional<sf::sw2d::ModelParams> params;
  std::vector<std::string> sources;
  std::int64_t toleranceUlp = 0;
};

Experiment load_experiment(const Options& o) {
  Experiment e;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot read config '" + o.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    e.params = sf::sw2d::ModelParams::from_json(ss.str());
    json j = json::parse(ss.str());
    const fs::path base = fs::path(o.config).parent_path();
    if (j.contains("sources")) {
      for (const auto& s : j["sources"]) e.sources.push_back((base / s.get<std::string>()).lexically_normal().string());
    }
    if (j.contains("tolerance")) e.toleranceUlp = j["tolerance"].value("ulp", std::int64_t{0});
  }
  if (!o.inputs.empty()) e.sources = o.inputs;
  if (o.toleranceUlp >= 0) e.toleranceUlp = o.toleranceUlp;
  if (e.sources.empty()) throw UsageError("no input files (pass them or list \"sources\" in --config)");
  for (const auto& s : e.sources) {
    if (!fs::exists(s)) throw UsageError("no such input file '" + s + "'");
  }
  return e;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  fs::create_directories(dir);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sf::Error("cannot write '" + p.string() + "'");
  out << text;
}

sf::Variant variant_of(const std::string& s) {
  auto v = sf::parse_variant(s);
  if (!v) throw UsageError("unknown variant '" + s + "' (valid: baseline, channelized, smartcache)");
  return *v;
}

struct Compiled {
  Experiment exp;
  sf::ProgramAst ast;
  std::shared_ptr<sf::FunctionalIR> ir;
};

Compiled compile_front(const Options& o) {
  Compiled c;
  c.exp = load_experiment(o);
  c.ast = sf::load_sources(c.exp.sources);
  std::map<std::string, double> overrides;
  if (c.exp.params) overrides = c.exp.params->overrides();
  sf::RewriteRules rules;
  rules.fuse = !o.noFuse;
  rules.fission = o.fission;
  c.ir = std::make_shared<sf::FunctionalIR>(sf::analyze_program(c.ast, overrides, rules));
  return c;
}

sf::PipelineGraph lower_with(const sf::FunctionalIR& ir, sf::Variant v, const Options& o) {
  sf::LowerOptions lo;
  lo.capacity = o.capacity;
  lo.boundary = o.boundary == "zero" ? sf::BoundaryPolicy::Zero : sf::BoundaryPolicy::Clamp;
  return sf::lower(ir, v, lo);
}

std::vector<sf::HostOp> plan_for(const sf::PipelineGraph& g, const std::string& transfers) {
  if (transfers == "minimal") return sf::plan_with(g, sf::minimize_transfers(g, sf::host_use(*g.ir)));
  if (transfers == "all") return sf::plan_transfer_everything(g);
  return g.hostPlan;
}

std::int64_t steps_of(const Options& o, const sf::FunctionalIR& ir) { return o.steps >= 0 ? o.steps : ir.timeSteps; }

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

/// Left-aligned columns, two spaces apart.
void print_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows) {
    w.resize(std::max(w.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(w[i] - r[i].size() + 2, ' ');
    }
    os << line << "\n";
  }
}

std::string offsets_text(const std::vector<sf::Offset>& offs) {
  std::string s = "{";
  for (std::size_t i = 0; i < offs.size(); ++i) {
    if (i) s += ",";
    s += "(";
    for (std::size_t d = 0; d < offs[i].size(); ++d) s += (d ? "," : "") + std::to_string(offs[i][d]);
    s += ")";
  }
  return s + "}";
}

int cmd_refactor(const Options& o) {
  if (o.inputs.empty()) throw UsageError("refactor needs at least one input file");
  for (const auto& s : o.inputs) {
    if (!fs::exists(s)) throw UsageError("no such input file '" + s + "'");
  }
  ensure_dir(o.out);
  sf::RefactorReport report;
  auto ast = sf::refactor_all(sf::load_sources(o.inputs), &report);
  auto files = sf::emit_f95(ast);
  std::set<fs::path> in;
  for (const auto& s : o.inputs) in.insert(fs::weakly_canonical(s));
  for (const auto& [name, text] : files) {
    const fs::path p = fs::path(o.out) / name;
    if (in.count(fs::weakly_canonical(p))) throw UsageError("refusing to overwrite input '" + p.string() + "'");
    write_text(p, text);
    std::cout << p.string() << "\n";
  }
  if (o.emitReport) {
    const fs::path p = fs::path(o.out) / "refactor-report.json";
    write_text(p, report.to_json() + "\n");
    std::cout << p.string() << "\n";
  }
  return kOk;
}

int cmd_analyze(const Options& o) {
  auto c = compile_front(o);
  const auto& ir = *c.ir;
  std::vector<std::vector<std::string>> rows{{"node", "kind", "domain", "reads", "writes"}};
  for (const auto& n : ir.nodes) {
    std::string dom;
    for (std::size_t d = 0; d < n.domain.lo.size(); ++d) {
      dom += (d ? "x" : "") + std::to_string(n.domain.lo[d]) + ":" + std::to_string(n.domain.hi[d]);
    }
    std::string reads;
    for (const auto& a : n.inputs) reads += (reads.empty() ? "" : " ") + a.array + offsets_text(a.offsets);
    std::string writes;
    for (const auto& a : n.outputs) writes += (writes.empty() ? "" : " ") + a.array;
    rows.push_back({n.name, sf::to_string(n.kind), dom, reads, writes});
  }
  if (o.dumpIr) {
    if (o.out.empty()) {
      std::cout << ir.to_json() << "\n";
      return kOk;
    }
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "ir.json", ir.to_json() + "\n");
  }
  print_table(std::cout, rows);
  return kOk;
}

int cmd_compile(const Options& o) {
  ensure_dir(o.out);
  auto c = compile_front(o);
  auto g = lower_with(*c.ir, variant_of(o.variant), o);
  g.validate();
  const fs::path out(o.out);
  const std::string base = "graph_" + o.variant + ".json";
  write_text(out / base, g.to_json() + "\n");
  std::cout << (out / base).string() << "\n";
  for (const auto& [name, text] : sf::emit_kernels(g)) {
    write_text(out / name, text);
    std::cout << (out / name).string() << "\n";
  }
  const auto s = sf::minimize_transfers(g, sf::host_use(*c.ir));
  json t;
  t["onceToDevice"] = s.onceToDevice;
  t["perStepToDevice"] = s.perStepToDevice;
  t["onceToHost"] = s.onceToHost;
  t["perStepToHost"] = s.perStepToHost;
  write_text(out / ("transfers_" + o.variant + ".json"), t.dump(2) + "\n");
  std::cout << (out / ("transfers_" + o.variant + ".json")).string() << "\n";
  if (o.dumpIr) write_text(out / "ir.json", c.ir->to_json() + "\n");
  return kOk;
}

sf::SimOptions sim_options(const Options& o, const std::vector<sf::HostOp>* plan) {
  auto sc = sf::parse_sched(o.sched);
  if (!sc) throw UsageError("bad --sched '" + o.sched + "' (expected rr or random:<seed>)");
  sc->maxSteps = o.maxSteps;
  return sf::SimOptions{*sc, plan};
}

int cmd_simulate(const Options& o) {
  auto c = compile_front(o);
  auto g = lower_with(*c.ir, variant_of(o.variant), o);
  auto plan = plan_for(g, o.transfers);
  const auto nt = steps_of(o, *c.ir);
  sf::SimResult r;
  try {
    r = sf::run_pipeline(g, sf::ir_initial_state(*c.ir), nt, sim_options(o, &plan));
  } catch (const sf::DeadlockDetected& d) {
    throw Failure(d.what());
  }
  if (!o.dumpReport.empty()) write_text(o.dumpReport, r.report.to_json() + "\n");
  if (!o.out.empty()) {
    ensure_dir(o.out);
    for (const auto& name : sf::sw2d::live_fields()) {
      auto it = r.host.find(name);
      if (it != r.host.end()) sf::sw2d::write_field((fs::path(o.out) / name).string(), name, it->second);
    }
    write_text(fs::path(o.out) / "report.json", r.report.to_json() + "\n");
  }
  const auto& t = r.report.totals;
  std::cout << "variant " << o.variant << ", " << nt << " steps\n";
  print_table(std::cout, {{"global reads", std::to_string(t.globalReads)},
                          {"global writes", std::to_string(t.globalWrites)},
                          {"channel pushes", std::to_string(t.channelPushes)},
                          {"channel pops", std::to_string(t.channelPops)},
                          {"stalls", std::to_string(t.stallCycles)},
                          {"bytes to device", std::to_string(r.report.bytesToDevice)},
                          {"bytes to host", std::to_string(r.report.bytesToHost)}});
  return kOk;
}

/// Oracle final state at the experiment's size, in host-state form.
sf::HostState oracle_state(const Compiled& c, std::int64_t nt) {
  sf::sw2d::ModelParams p = c.exp.params ? *c.exp.params : sf::sw2d::ModelParams{};
  return sf::sw2d::to_host(sf::sw2d::run_reference(p, static_cast<int>(nt)));
}

int cmd_compare(const Options& o) {
  auto c = compile_front(o);
  const auto nt = steps_of(o, *c.ir);
  if (!c.exp.params) throw UsageError("compare needs --config");
  const auto expected = oracle_state(c, nt);
  const auto init = sf::ir_initial_state(*c.ir);
  bool pass = true;
  json out;
  out["steps"] = nt;
  out["toleranceUlp"] = c.exp.toleranceUlp;
  std::vector<std::vector<std::string>> diffs{{"variant", "field", "max|diff|", "maxULP", "mismatches"}};
  std::vector<std::vector<std::string>> acc{{"variant", "reads", "writes", "total", "vs baseline", "pushes", "seconds"}};
  std::int64_t baseTotal = 0;
  for (const auto& name : o.variants) {
    const auto v = variant_of(name);
    auto g = lower_with(*c.ir, v, o);
    const auto t0 = std::chrono::steady_clock::now();
    sf::SimResult r;
    try {
      r = sf::run_pipeline(g, init, nt, sim_options(o, nullptr));
    } catch (const sf::DeadlockDetected& d) {
      throw Failure(name + ": " + d.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto d = sf::diff_fields(expected, r.host, sf::sw2d::live_fields());
    json jv;
    for (const auto& f : d) {
      const bool ok = f.present && f.maxUlp <= c.exp.toleranceUlp;
      pass = pass && ok;
      diffs.push_back({name, f.name, f.present ? fmt(f.maxAbs) : "missing", std::to_string(f.maxUlp), std::to_string(f.mismatches)});
      jv["fields"][f.name] = {{"maxAbs", f.maxAbs}, {"maxUlp", f.maxUlp}, {"mismatches", f.mismatches}, {"present", f.present}};
    }
    const auto& t = r.report.totals;
    if (v == sf::Variant::Baseline) baseTotal = t.global_accesses();
    const std::string ratio = baseTotal ? fmt(static_cast<double>(t.global_accesses()) / static_cast<double>(baseTotal)) : "-";
    acc.push_back({name, std::to_string(t.globalReads), std::to_string(t.globalWrites), std::to_string(t.global_accesses()),
                   ratio, std::to_string(t.channelPushes), fmt(secs)});
    jv["globalReads"] = t.globalReads;
    jv["globalWrites"] = t.globalWrites;
    jv["globalAccesses"] = t.global_accesses();
    jv["channelPushes"] = t.channelPushes;
    out["variants"][name] = jv;
  }
  out["verdict"] = pass ? "PASS" : "FAIL";
  if (o.json) {
    std::cout << out.dump(2) << "\n";
  } else {
    print_table(std::cout, diffs);
    std::cout << "\n";
    print_table(std::cout, acc);
    std::cout << "\n" << (pass ? "PASS" : "FAIL") << " (tolerance " << c.exp.toleranceUlp << " ULP, " << nt << " steps)\n";
  }
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "compare.json", out.dump(2) + "\n");
  }
  return pass ? kOk : kFailed;
}

std::int64_t plan_bytes(const sf::PipelineGraph& g, const std::vector<sf::HostOp>& plan, std::int64_t nt) {
  std::int64_t total = 0;
  for (const auto& op : plan) {
    if (op.kind == sf::HostOpKind::TimeLoop) total += nt * plan_bytes(g, op.body, nt);
    if (op.kind != sf::HostOpKind::TransferToDev && op.kind != sf::HostOpKind::TransferToHost) continue;
    for (const auto& a : op.arrays) total += g.array(a)->shape.size() * static_cast<std::int64_t>(sizeof(sf::Word));
  }
  return total;
}

int cmd_metrics(const Options& o) {
  auto c = compile_front(o);
  const auto nt = steps_of(o, *c.ir);
  std::vector<std::vector<std::string>> rows{
      {"variant", "kernels", "channels", "caches", "reads", "writes", "total", "vs baseline", "bytes(min)", "bytes(all)"}};
  json out;
  out["steps"] = nt;
  std::int64_t baseTotal = 0;
  for (const auto& name : o.variants) {
    const auto v = variant_of(name);
    auto g = lower_with(*c.ir, v, o);
    const auto r = sf::count_accesses(g, nt);
    const auto& t = r.totals;
    if (v == sf::Variant::Baseline) baseTotal = t.global_accesses();
    std::int64_t kernels = 0;
    for (const auto& k : g.kernels) kernels += k.kind == sf::ProcessKind::Compute ? 1 : 0;
    const auto minimal = plan_bytes(g, plan_for(g, "minimal"), nt);
    const auto all = plan_bytes(g, plan_for(g, "all"), nt);
    const double ratio = baseTotal ? static_cast<double>(t.global_accesses()) / static_cast<double>(baseTotal) : 0.0;
    rows.push_back({name, std::to_string(kernels), std::to_string(g.channels.size()), std::to_string(g.smartCaches.size()),
                    std::to_string(t.globalReads), std::to_string(t.globalWrites), std::to_string(t.global_accesses()),
                    baseTotal ? fmt(ratio) : "-", std::to_string(minimal), std::to_string(all)});
    json jv{{"computeKernels", kernels},
            {"channels", g.channels.size()},
            {"smartCaches", g.smartCaches.size()},
            {"globalReads", t.globalReads},
            {"globalWrites", t.globalWrites},
            {"globalAccesses", t.global_accesses()},
            {"transferBytesMinimal", minimal},
            {"transferBytesEverything", all}};
    if (baseTotal) jv["ratioToBaseline"] = ratio;
    jv["perKernel"] = json::object();
    for (const auto& [k, pc] : r.perKernel) jv["perKernel"][k] = {{"globalReads", pc.globalReads}, {"globalWrites", pc.globalWrites}};
    out["variants"][name] = jv;
  }
  if (o.json) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "global accesses counted per scalar element, " << nt << " steps\n";
    print_table(std::cout, rows);
  }
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "metrics.json", out.dump(2) + "\n");
  }
  return kOk;
}

void add_inputs(CLI::App* s, Options& o, bool required) {
  auto* opt = s->add_option("inputs", o.inputs, "Fortran source files");
  if (required) opt->required();
}

void add_front(CLI::App* s, Options& o) {
  s->add_option("--config", o.config, "experiment config (JSON)");
  s->add_flag("--no-fuse", o.noFuse, "keep producer and consumer maps apart");
  s->add_flag("--fission", o.fission, "split multi-output maps");
}

void add_lowering(CLI::App* s, Options& o) {
  s->add_option("--capacity", o.capacity, "channel capacity")->check(CLI::PositiveNumber);
  s->add_option("--boundary", o.boundary, "smart-cache boundary policy")->check(CLI::IsMember({"clamp", "zero"}));
}

void add_sim(CLI::App* s, Options& o) {
  s->add_option("--sched", o.sched, "rr or random:<seed>");
  s->add_option("--max-steps", o.maxSteps, "scheduler step budget")->check(CLI::PositiveNumber);
  s->add_option("--steps", o.steps, "time steps (default: the program's)")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sfc: FORTRAN 77 to streaming dataflow compiler and simulator"};
  app.require_subcommand(1);
  Options o;

  auto* refactor = app.add_subcommand("refactor", "write refactored Fortran 95 sources");
  add_inputs(refactor, o, true);
  refactor->add_option("--out", o.out, "output directory")->required();
  refactor->add_flag("--emit-report", o.emitReport, "also write refactor-report.json");

  auto* analyze = app.add_subcommand("analyze", "print the map/fold structure of the time loop");
  add_inputs(analyze, o, false);
  add_front(analyze, o);
  analyze->add_option("--out", o.out, "output directory");
  analyze->add_flag("--dump-ir", o.dumpIr, "write ir.json (stdout without --out)");

  auto* compile = app.add_subcommand("compile", "lower to a pipeline and emit kernel text");
  add_inputs(compile, o, false);
  add_front(compile, o);
  add_lowering(compile, o);
  compile->add_option("--variant", o.variant, "pipeline variant")->check(CLI::IsMember(kVariants));
  compile->add_option("--out", o.out, "output directory")->required();
  compile->add_flag("--dump-ir", o.dumpIr, "also write ir.json");

  auto* simulate = app.add_subcommand("simulate", "run one pipeline variant in the simulator");
  add_inputs(simulate, o, false);
  add_front(simulate, o);
  add_lowering(simulate, o);
  add_sim(simulate, o);
  simulate->add_option("--variant", o.variant, "pipeline variant")->check(CLI::IsMember(kVariants));
  simulate->add_option("--transfers", o.transfers, "host transfer plan")->check(CLI::IsMember({"default", "minimal", "all"}));
  simulate->add_option("--dump-report", o.dumpReport, "write the report JSON here");
  simulate->add_option("--out", o.out, "write final fields and report here");

  auto* compare = app.add_subcommand("compare", "check variants against the reference oracle");
  add_inputs(compare, o, false);
  add_front(compare, o);
  add_lowering(compare, o);
  add_sim(compare, o);
  compare->add_option("--variants", o.variants, "variants to run")->delimiter(',')->check(CLI::IsMember(kVariants));
  compare->add_option("--tolerance-ulp", o.toleranceUlp, "allowed ULP difference (default from config, else 0)")
      ->check(CLI::NonNegativeNumber);
  compare->add_flag("--json", o.json, "print JSON instead of tables");
  compare->add_option("--out", o.out, "write compare.json here");

  auto* metrics = app.add_subcommand("metrics", "closed-form access counts per variant");
  add_inputs(metrics, o, false);
  add_front(metrics, o);
  add_lowering(metrics, o);
  metrics->add_option("--steps", o.steps, "time steps (default: the program's)")->check(CLI::NonNegativeNumber);
  metrics->add_option("--variants", o.variants, "variants")->delimiter(',')->check(CLI::IsMember(kVariants));
  metrics->add_flag("--json", o.json, "print JSON instead of a table");
  metrics->add_option("--out", o.out, "write metrics.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*refactor) return cmd_refactor(o);
    if (*analyze) return cmd_analyze(o);
    if (*compile) return cmd_compile(o);
    if (*simulate) return cmd_simulate(o);
    if (*compare) return cmd_compare(o);
    if (*metrics) return cmd_metrics(o);
  } catch (const UsageError& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return kUsage;
  } catch (const Failure& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return kFailed;
  } catch (const sf::SourceError& e) {
    std::cerr << e.diagnostic() << "\n";
    return kFailed;
  } catch (const sf::Error& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "sfc: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
