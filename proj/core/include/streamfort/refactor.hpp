#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "streamfort/ast.hpp"

namespace sf {

struct RefactorReport {
  /// (unit, identifier) pairs that received an explicit declaration.
  std::vector<std::pair<std::string, std::string>> implicitDeclsAdded;
  std::map<std::pair<std::string, std::string>, Intent> intentsInferred;
  /// block -> unit -> dummy arguments appended to that unit.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> commonVarsPromoted;
  /// block -> variables no subprogram needs; they stay program locals or vanish.
  std::map<std::string, std::vector<std::string>> commonVarsDropped;
  /// Renamings forced by a clash between a promoted variable and a local.
  std::vector<std::string> nameClashes;
  int loopsNormalized = 0;

  std::string to_json() const;
};

/// Give every implicitly typed identifier an explicit declaration and add
/// IMPLICIT NONE to every unit.
ProgramAst make_types_explicit(ProgramAst ast, RefactorReport* report = nullptr);

/// Attach an intent to every dummy argument; bottom-up over the call graph.
ProgramAst infer_intents(ProgramAst ast, RefactorReport* report = nullptr);

/// Replace COMMON storage by arguments threaded through the call tree.
ProgramAst eliminate_common_blocks(ProgramAst ast, RefactorReport* report = nullptr);

/// Wrap each subprogram in its own module and add USE ... ONLY clauses.
ProgramAst modularize_units(ProgramAst ast);

/// Turn label-terminated DO loops into DO ... END DO and drop the labels.
ProgramAst normalize_loops(ProgramAst ast, RefactorReport* report = nullptr);

/// normalize_loops, make_types_explicit, eliminate_common_blocks,
/// infer_intents, modularize_units.
ProgramAst refactor_all(ProgramAst ast, RefactorReport* report = nullptr);

/// Free-form text per input file, keyed by output file name (<stem>.f95).
std::map<std::string, std::string> emit_f95(const ProgramAst& ast);

}  // namespace sf
