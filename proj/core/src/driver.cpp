#include "streamfort/driver.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"
#include "streamfort/interp.hpp"

namespace sf {

ProgramAst load_sources(const std::vector<std::string>& paths) {
  std::vector<SourceUnit> units;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read '" + p + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto ext = std::filesystem::path(p).extension().string();
    auto parsed = ext == ".f95" || ext == ".f90" ? parse_free_form(ss.str(), p) : parse_source(ss.str(), p);
    for (auto& u : parsed) units.push_back(std::move(u));
  }
  return link_units(std::move(units));
}

FunctionalIR analyze_program(const ProgramAst& ast, const std::map<std::string, double>& overrides,
                             const RewriteRules& rules) {
  if (overrides.empty()) return rewrite_ir(build_ir(ast), rules);
  return rewrite_ir(build_ir(specialize_parameters(ast, overrides)), rules);
}

std::vector<FieldDiff> diff_fields(const HostState& expected, const HostState& actual,
                                   const std::vector<std::string>& names) {
  std::vector<FieldDiff> out;
  for (const auto& n : names) {
    FieldDiff d;
    d.name = n;
    auto e = expected.find(n);
    auto a = actual.find(n);
    if (e == expected.end() || a == actual.end() || !(e->second.shape == a->second.shape) ||
        e->second.type != a->second.type) {
      d.present = false;
      out.push_back(d);
      continue;
    }
    const Field& fe = e->second;
    const Field& fa = a->second;
    for (std::size_t i = 0; i < fe.data.size(); ++i) {
      if (fe.data[i] == fa.data[i]) continue;
      ++d.mismatches;
      if (fe.type == BaseType::Real) {
        const float x = std::bit_cast<float>(fe.data[i]);
        const float y = std::bit_cast<float>(fa.data[i]);
        d.maxAbs = std::max(d.maxAbs, std::fabs(static_cast<double>(x) - static_cast<double>(y)));
        d.maxUlp = std::max(d.maxUlp, ulp_distance(x, y));
      } else {
        const auto x = static_cast<std::int64_t>(std::bit_cast<std::int32_t>(fe.data[i]));
        const auto y = static_cast<std::int64_t>(std::bit_cast<std::int32_t>(fa.data[i]));
        d.maxAbs = std::max(d.maxAbs, static_cast<double>(std::llabs(x - y)));
        d.maxUlp = std::max<std::int64_t>(d.maxUlp, std::llabs(x - y));
      }
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace sf
