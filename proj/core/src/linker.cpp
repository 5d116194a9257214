#include <set>

#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"
#include "streamfort/value.hpp"

namespace sf {

namespace {

class Linker {
 public:
  explicit Linker(ProgramAst& ast) : ast_(ast) {}

  void run() {
    check_units();
    for (const auto& u : ast_.units) link_unit(u);
  }

 private:
  void check_units() {
    std::set<std::string> names;
    const SourceUnit* prog = nullptr;
    for (const auto& u : ast_.units) {
      if (!names.insert(u.name).second) throw DuplicateUnit(u.name);
      if (u.kind == UnitKind::Program) {
        if (prog) {
          throw SemanticError(u.path, u.loc.line, u.loc.col,
                              "second PROGRAM unit '" + u.name + "' (first is '" + prog->name + "')");
        }
        prog = &u;
      }
    }
    if (!prog) throw NoProgramUnit();
  }

  [[noreturn]] static void fail(const SourceUnit& u, SourceLoc loc, const std::string& msg) {
    throw SemanticError(u.path, loc.line, loc.col, msg);
  }

  void link_unit(const SourceUnit& u) {
    SymbolTable& tab = ast_.symbolTables[u.name];
    for (const auto& d : u.decls) {
      Symbol s;
      s.type = d.type ? *d.type : implicit_type(d.name);
      s.origin = d.type ? Origin::Explicit : Origin::Implicit;
      s.rank = static_cast<int>(d.dims.size());
      s.bounds = d.dims;
      if (d.paramValue) s.kind = SymbolKind::Parameter;
      else if (u.is_arg(d.name)) s.kind = SymbolKind::Dummy;
      else if (u.common_block_of(d.name)) s.kind = SymbolKind::Common;
      else if (u.kind == UnitKind::Function && d.name == u.name) s.kind = SymbolKind::FunctionResult;
      tab[d.name] = s;
    }
    auto note = [&](const std::string& name, SymbolKind kind) {
      if (tab.count(name)) return;
      Symbol s;
      s.type = implicit_type(name);
      s.origin = Origin::Implicit;
      s.kind = kind;
      tab[name] = s;
    };
    for (const auto& a : u.args) note(a, SymbolKind::Dummy);
    if (u.kind == UnitKind::Function) note(u.name, SymbolKind::FunctionResult);

    ParamValues params;
    try {
      params = parameter_values(u);
    } catch (const EvalError& e) {
      fail(u, u.loc, e.what());
    }

    auto check_expr = [&](const ExprPtr& root, bool call_arg) {
      for_each_expr(root, [&](const Expr& e) {
        switch (e.kind) {
          case ExprKind::Var:
            note(e.name, SymbolKind::Local);
            if (u.is_array(e.name) && !(call_arg && root.get() == &e)) {
              fail(u, e.loc, "whole-array reference to '" + e.name + "' outside an argument list");
            }
            break;
          case ExprKind::ArrayRef: {
            const Decl* d = u.find_decl(e.name);
            if (d && d->dims.size() != e.args.size()) {
              fail(u, e.loc,
                   "'" + e.name + "' has rank " + std::to_string(d->dims.size()) + " but is indexed with " +
                       std::to_string(e.args.size()) + " subscripts");
            }
            break;
          }
          case ExprKind::Call:
            if (is_intrinsic(e.name)) break;
            link_call(u, e.name, e.args.size(), e.loc, true);
            note(e.name, SymbolKind::External);
            break;
          default:
            break;
        }
      });
    };

    for_each_stmt(u.body, [&](const Stmt& s) {
      switch (s.kind) {
        case StmtKind::Assign:
          if (s.lhs->kind == ExprKind::Var && u.is_array(s.lhs->name)) {
            fail(u, s.loc, "whole-array assignment to '" + s.lhs->name + "'");
          }
          check_expr(s.lhs, false);
          check_expr(s.rhs, false);
          if (s.lhs->kind == ExprKind::Var) {
            auto it = tab.find(s.lhs->name);
            if (it != tab.end() && it->second.kind == SymbolKind::Parameter) {
              fail(u, s.loc, "assignment to PARAMETER '" + s.lhs->name + "'");
            }
          }
          break;
        case StmtKind::Do: {
          note(s.var, SymbolKind::Local);
          if (tab[s.var].type != BaseType::Integer || u.is_array(s.var)) {
            fail(u, s.loc, "DO variable '" + s.var + "' must be an integer scalar");
          }
          for (const auto& b : {s.lo, s.hi, s.step}) {
            if (!b) continue;
            check_expr(b, false);
            if (expr_type(u, b) != BaseType::Integer) fail(u, b->loc, "DO bounds must be integer expressions");
          }
          if (s.step) {
            auto v = const_eval(s.step, params);
            if (!v) throw UnsupportedFeature(u.path, s.loc.line, "non-constant DO step");
            if (v->as_int() == 0) fail(u, s.step->loc, "DO step must be nonzero");
          }
          break;
        }
        case StmtKind::If:
          check_expr(s.cond, false);
          if (expr_type(u, s.cond) != BaseType::Logical) fail(u, s.cond->loc, "IF condition is not logical");
          break;
        case StmtKind::Call:
          link_call(u, s.callee, s.args.size(), s.loc, false);
          for (const auto& a : s.args) check_expr(a, true);
          break;
        default:
          break;
      }
    });
    for (const auto& d : u.decls) {
      for (const auto& dim : d.dims) {
        for (const auto& b : {dim.lo, dim.hi}) {
          if (b && !const_eval(b, params)) {
            throw UnsupportedFeature(u.path, d.loc.line, "adjustable array bounds for '" + d.name + "'");
          }
        }
      }
    }
  }

  void link_call(const SourceUnit& caller, const std::string& name, std::size_t nargs, SourceLoc loc, bool as_function) {
    const SourceUnit* callee = ast_.find_unit(name);
    if (!callee) throw UnresolvedCallee(name, caller.name);
    if (callee->kind == UnitKind::Program) fail(caller, loc, "call to the main program '" + name + "'");
    if (as_function && callee->kind != UnitKind::Function) {
      fail(caller, loc, "subroutine '" + name + "' referenced as a function");
    }
    if (!as_function && callee->kind != UnitKind::Subroutine) {
      fail(caller, loc, "function '" + name + "' invoked with CALL");
    }
    if (callee->args.size() != nargs) {
      fail(caller, loc,
           "'" + name + "' expects " + std::to_string(callee->args.size()) + " arguments, got " +
               std::to_string(nargs));
    }
    ast_.callGraph.push_back(CallEdge{caller.name, name, loc});
  }

  ProgramAst& ast_;
};

}  // namespace

BaseType expr_type(const SourceUnit& unit, const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::IntConst: return BaseType::Integer;
    case ExprKind::RealConst: return BaseType::Real;
    case ExprKind::LogicalConst: return BaseType::Logical;
    case ExprKind::Var:
    case ExprKind::ArrayRef: return type_of(unit, e->name);
    case ExprKind::Call: {
      if (!is_intrinsic(e->name)) return type_of(unit, e->name);
      if (e->name == "sqrt") return BaseType::Real;
      for (const auto& a : e->args) {
        if (expr_type(unit, a) != BaseType::Integer) return BaseType::Real;
      }
      return BaseType::Integer;
    }
    case ExprKind::Unary:
      return e->uop == UnOp::Not ? BaseType::Logical : expr_type(unit, e->args[0]);
    case ExprKind::Binary:
      switch (e->bop) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div:
          if (expr_type(unit, e->args[0]) == BaseType::Integer && expr_type(unit, e->args[1]) == BaseType::Integer) {
            return BaseType::Integer;
          }
          return BaseType::Real;
        default:
          return BaseType::Logical;
      }
  }
  return BaseType::Real;
}

ProgramAst link_units(std::vector<SourceUnit> units) {
  ProgramAst ast;
  ast.units = std::move(units);
  Linker(ast).run();
  return ast;
}

}  // namespace sf
