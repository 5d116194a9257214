#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "streamfort/driver.hpp"
#include "streamfort/pipeline.hpp"
#include "streamfort/sim.hpp"
#include "streamfort/sw2d.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"write golden reference files for the shallow-water corpus"};
  std::string corpus;
  std::string out;
  app.add_option("--corpus", corpus, "directory holding main.f, dyn.f, shapiro.f, update.f")->required();
  app.add_option("--out", out, "golden directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out);
    std::vector<std::string> sources;
    for (const char* f : {"main.f", "dyn.f", "shapiro.f", "update.f"}) sources.push_back((fs::path(corpus) / f).string());
    const auto ast = sf::load_sources(sources);

    const auto ir = sf::analyze_program(ast);
    std::ofstream(fs::path(out) / "ir.json") << ir.to_json() << "\n";

    sf::sw2d::ModelParams p;
    const auto host = sf::sw2d::to_host(sf::sw2d::run_reference(p, p.nt));
    const fs::path fields = fs::path(out) / "fields_32x32_nt100";
    fs::create_directories(fields);
    for (const auto& name : sf::sw2d::live_fields()) sf::sw2d::write_field((fields / name).string(), name, host.at(name));

    sf::sw2d::ModelParams big;
    big.nx = 64;
    big.ny = 64;
    big.nt = 10;
    const auto ir64 = sf::analyze_program(ast, big.overrides());
    nlohmann::ordered_json j;
    j["grid"] = {64, 64};
    j["steps"] = 10;
    j["unit"] = "one scalar element";
    std::int64_t base = 0;
    for (auto v : {sf::Variant::Baseline, sf::Variant::Channelized, sf::Variant::SmartCache}) {
      const auto g = sf::lower(ir64, v);
      const auto t = sf::count_accesses(g, big.nt).totals;
      if (v == sf::Variant::Baseline) base = t.global_accesses();
      j["variants"][sf::to_string(v)] = {{"globalReads", t.globalReads},
                                         {"globalWrites", t.globalWrites},
                                         {"globalAccesses", t.global_accesses()},
                                         {"ratioToBaseline", static_cast<double>(t.global_accesses()) / static_cast<double>(base)}};
    }
    std::ofstream(fs::path(out) / "accesses_64x64_nt10.json") << j.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "sw2d_golden: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
