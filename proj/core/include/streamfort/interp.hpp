#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "streamfort/ast.hpp"
#include "streamfort/value.hpp"

namespace sf {

/// Observed accesses to one dummy argument, merged over every activation.
struct ArgAccess {
  bool read = false;
  bool written = false;
  /// Some element was read before this activation had written it.
  bool readBeforeWrite = false;
};

using IntentTrace = std::map<std::pair<std::string, std::string>, ArgAccess>;

/// Tree-walking evaluator for the supported subset. Arguments are passed
/// by reference, COMMON storage is shared positionally, locals start at
/// zero on every activation. Returns the program unit's variables
/// (PARAMETERs excluded) after it finishes.
HostState run_program(const ProgramAst& ast, IntentTrace* trace = nullptr);

/// Execute statements directly over `state`, treating `scope` as the
/// declaring unit. Names missing from `state` are created from the scope's
/// declarations. CALLs resolve against `ast` when given.
void exec_host(const SourceUnit& scope, const std::vector<Stmt>& stmts, HostState& state,
               const ProgramAst* ast = nullptr);

/// Replace the value of every PARAMETER whose name appears in `overrides`
/// (in every unit) by a literal of the declared type.
ProgramAst specialize_parameters(ProgramAst ast, const std::map<std::string, double>& overrides);

/// Shortest Fortran literal that reads back as exactly `f`.
std::string real_literal(float f);

}  // namespace sf
