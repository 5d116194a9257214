#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "streamfort/analyzer.hpp"
#include "streamfort/ast.hpp"
#include "streamfort/value.hpp"

namespace sf {

/// Read, parse and link source files. `.f95` and `.f90` are free form,
/// everything else fixed form.
ProgramAst load_sources(const std::vector<std::string>& paths);

/// Parameter overrides applied, IR built and rewritten with default rules.
FunctionalIR analyze_program(const ProgramAst& ast, const std::map<std::string, double>& overrides = {},
                             const RewriteRules& rules = {});

struct FieldDiff {
  std::string name;
  double maxAbs = 0.0;
  std::int64_t maxUlp = 0;
  std::int64_t mismatches = 0;
  bool present = true;
};

/// Elementwise comparison of the named fields. Integer fields report
/// their differences as ULPs too.
std::vector<FieldDiff> diff_fields(const HostState& expected, const HostState& actual,
                                   const std::vector<std::string>& names);

}  // namespace sf
