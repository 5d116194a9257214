#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "streamfort/ast.hpp"

namespace sf {

/// Parse fixed-form FORTRAN 77 source (labels in columns 1-5, continuation
/// mark in column 6, statement text in 7-72). Identifiers are lower-cased.
///
/// Supported: PROGRAM/SUBROUTINE/FUNCTION, REAL/INTEGER/LOGICAL,
/// PARAMETER, DIMENSION, COMMON, IMPLICIT NONE, assignments, labelled and
/// structured DO, block and logical IF, CALL, CONTINUE, RETURN and the
/// intrinsics abs, min, max, sqrt, mod. Anything else raises
/// UnsupportedFeature or SyntaxError.
std::vector<SourceUnit> parse_source(std::string_view text, const std::string& path);

/// Reader for the free-form text produced by emit_f95: modules wrapping one
/// unit each, USE ... ONLY lists, `::` declarations with INTENT and
/// PARAMETER attributes, `&` continuations.
std::vector<SourceUnit> parse_free_form(std::string_view text, const std::string& path);

/// Link units from one or more files into a whole program: resolve calls,
/// build the call graph and per-unit symbol tables.
ProgramAst link_units(std::vector<SourceUnit> units);

/// Static type of an expression under the unit's declarations and the
/// implicit typing rule.
BaseType expr_type(const SourceUnit& unit, const ExprPtr& e);

enum class SourceForm { Fixed, Free };

std::string print_expr(const ExprPtr& e);
/// Statements of one unit body, indented by `indent` levels.
std::string print_stmts(const std::vector<Stmt>& stmts, SourceForm form, int indent = 0);
/// One unit as fixed-form FORTRAN 77 (declarations normalized).
std::string print_fixed_form(const SourceUnit& unit);
std::string print_fixed_form(const std::vector<SourceUnit>& units);
/// One unit as free-form Fortran 95, wrapped in its module when it has one.
std::string print_free_form(const SourceUnit& unit);

}  // namespace sf
