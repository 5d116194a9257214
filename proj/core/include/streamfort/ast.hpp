#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sf {

enum class BaseType { Real, Integer, Logical };

const char* to_string(BaseType t);

struct SourceLoc {
  int line = 0;
  int col = 0;
};

enum class ExprKind { IntConst, RealConst, LogicalConst, Var, ArrayRef, Call, Unary, Binary };

enum class BinOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp { Neg, Plus, Not };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression node. Transformations build new nodes and share
/// untouched subtrees.
struct Expr {
  ExprKind kind = ExprKind::IntConst;
  std::string name;  // Var, ArrayRef, Call
  std::string text;  // RealConst spelling, kept for exact printing
  std::int32_t ival = 0;
  float rval = 0.0F;
  bool bval = false;
  BinOp bop = BinOp::Add;
  UnOp uop = UnOp::Neg;
  std::vector<ExprPtr> args;  // subscripts, call arguments or operands
  SourceLoc loc;
};

ExprPtr make_int(std::int32_t v, SourceLoc loc = {});
ExprPtr make_real(const std::string& text, SourceLoc loc = {});
ExprPtr make_logical(bool v, SourceLoc loc = {});
ExprPtr make_var(const std::string& name, SourceLoc loc = {});
ExprPtr make_array_ref(const std::string& name, std::vector<ExprPtr> subscripts, SourceLoc loc = {});
ExprPtr make_call(const std::string& name, std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr make_unary(UnOp op, ExprPtr operand, SourceLoc loc = {});
ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs, SourceLoc loc = {});

/// Structural equality ignoring source locations.
bool equal(const ExprPtr& a, const ExprPtr& b);

enum class StmtKind { Assign, Do, If, Call, Return, Continue };

struct Stmt {
  StmtKind kind = StmtKind::Continue;
  int label = 0;  // statement label, 0 when absent
  SourceLoc loc;

  // Assign
  ExprPtr lhs;
  ExprPtr rhs;

  // Do. doLabel != 0 marks a label-terminated (FORTRAN 77) loop whose
  // terminal statement is the last element of body, or is owned by a
  // nested loop sharing the same label.
  int doLabel = 0;
  std::string var;
  ExprPtr lo;
  ExprPtr hi;
  ExprPtr step;  // null means 1
  std::vector<Stmt> body;

  // If. A logical IF holds exactly one statement in thenBody. ELSE IF is an
  // If with elseIf set as the only element of the enclosing elseBody.
  ExprPtr cond;
  std::vector<Stmt> thenBody;
  std::vector<Stmt> elseBody;
  bool logicalIf = false;
  bool elseIf = false;

  // Call
  std::string callee;
  std::vector<ExprPtr> args;
};

bool equal(const Stmt& a, const Stmt& b);
bool equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b);

enum class Intent { In, Out, InOut };
const char* to_string(Intent i);

struct Dim {
  ExprPtr lo;  // null means 1
  ExprPtr hi;
};

struct Decl {
  std::string name;
  std::optional<BaseType> type;  // set when an explicit type statement names it
  std::vector<Dim> dims;
  ExprPtr paramValue;  // PARAMETER constant
  std::optional<Intent> intent;
  SourceLoc loc;
};

struct CommonBlock {
  std::string name;
  std::vector<std::string> vars;
  SourceLoc loc;
};

struct UseClause {
  std::string module;
  std::vector<std::string> only;
};

enum class UnitKind { Program, Subroutine, Function };
const char* to_string(UnitKind k);

struct SourceUnit {
  std::string path;
  UnitKind kind = UnitKind::Program;
  std::string name;
  std::vector<std::string> args;
  bool implicitNone = false;
  std::vector<Decl> decls;
  std::vector<CommonBlock> commonBlocks;
  std::vector<UseClause> uses;
  std::string moduleName;  // set once wrapped in a module
  std::vector<Stmt> body;
  /// Names given two different explicit types; reported by the
  /// type-explicitation pass.
  std::vector<std::string> typeConflicts;
  SourceLoc loc;

  const Decl* find_decl(const std::string& n) const;
  Decl* find_decl(const std::string& n);
  Decl& decl_for(const std::string& n);  // find or append
  bool is_arg(const std::string& n) const;
  bool is_array(const std::string& n) const;
  /// Block name of `n` if it is declared in a COMMON statement.
  std::optional<std::string> common_block_of(const std::string& n) const;
};

bool equal(const SourceUnit& a, const SourceUnit& b);

enum class Origin { Explicit, Implicit };

enum class SymbolKind { Local, Dummy, Common, Parameter, FunctionResult, External };

struct Symbol {
  BaseType type = BaseType::Real;
  int rank = 0;
  std::vector<Dim> bounds;
  Origin origin = Origin::Explicit;
  SymbolKind kind = SymbolKind::Local;
};

struct CallEdge {
  std::string caller;
  std::string callee;
  SourceLoc site;
};

using SymbolTable = std::map<std::string, Symbol>;

struct ProgramAst {
  std::vector<SourceUnit> units;
  std::vector<CallEdge> callGraph;
  std::map<std::string, SymbolTable> symbolTables;

  const SourceUnit& program() const;
  SourceUnit& program();
  const SourceUnit* find_unit(const std::string& name) const;
  SourceUnit* find_unit(const std::string& name);
  /// Distinct callees of `unit` in first-call order.
  std::vector<std::string> callees(const std::string& unit) const;
  /// Units ordered so that every callee precedes its callers.
  std::vector<std::string> bottom_up_order() const;
};

/// AST equality modulo source locations, ignoring the derived call graph
/// and symbol tables.
bool equal(const ProgramAst& a, const ProgramAst& b);

bool is_intrinsic(const std::string& name);

/// Default F77 typing: first letter i..n is INTEGER, otherwise REAL.
BaseType implicit_type(const std::string& name);

// ---- traversal helpers ----------------------------------------------------

void for_each_expr(const ExprPtr& e, const std::function<void(const Expr&)>& fn);
void for_each_stmt(const std::vector<Stmt>& stmts, const std::function<void(const Stmt&)>& fn);
/// Visit every expression appearing in `stmts` (including nested bodies).
void for_each_expr_in(const std::vector<Stmt>& stmts, const std::function<void(const Expr&)>& fn);

/// Rebuild `e` bottom-up; `fn` may return a replacement for any node or
/// null to keep it.
ExprPtr rewrite_expr(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn);
std::vector<Stmt> rewrite_exprs(std::vector<Stmt> stmts, const std::function<ExprPtr(const ExprPtr&)>& fn);

/// Rename variables (scalars, arrays, call arguments, DO variables).
std::vector<Stmt> rename_vars(std::vector<Stmt> stmts, const std::map<std::string, std::string>& renames);

}  // namespace sf
