#include "streamfort/ast.hpp"

#include <algorithm>
#include <bit>
#include <array>
#include <cctype>
#include <cstdlib>
#include <set>

#include "streamfort/errors.hpp"

namespace sf {

const char* to_string(BaseType t) {
  switch (t) {
    case BaseType::Real: return "real";
    case BaseType::Integer: return "integer";
    case BaseType::Logical: return "logical";
  }
  return "?";
}

const char* to_string(Intent i) {
  switch (i) {
    case Intent::In: return "in";
    case Intent::Out: return "out";
    case Intent::InOut: return "inout";
  }
  return "?";
}

const char* to_string(UnitKind k) {
  switch (k) {
    case UnitKind::Program: return "program";
    case UnitKind::Subroutine: return "subroutine";
    case UnitKind::Function: return "function";
  }
  return "?";
}

ExprPtr make_int(std::int32_t v, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::IntConst;
  e->ival = v;
  e->loc = loc;
  return e;
}

ExprPtr make_real(const std::string& text, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::RealConst;
  e->text = text;
  std::string t = text;
  std::replace(t.begin(), t.end(), 'd', 'e');
  e->rval = std::strtof(t.c_str(), nullptr);
  e->loc = loc;
  return e;
}

ExprPtr make_logical(bool v, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::LogicalConst;
  e->bval = v;
  e->loc = loc;
  return e;
}

ExprPtr make_var(const std::string& name, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->name = name;
  e->loc = loc;
  return e;
}

ExprPtr make_array_ref(const std::string& name, std::vector<ExprPtr> subscripts, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::ArrayRef;
  e->name = name;
  e->args = std::move(subscripts);
  e->loc = loc;
  return e;
}

ExprPtr make_call(const std::string& name, std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Call;
  e->name = name;
  e->args = std::move(args);
  e->loc = loc;
  return e;
}

ExprPtr make_unary(UnOp op, ExprPtr operand, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Unary;
  e->uop = op;
  e->args = {std::move(operand)};
  e->loc = loc;
  return e;
}

ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Binary;
  e->bop = op;
  e->args = {std::move(lhs), std::move(rhs)};
  e->loc = loc;
  return e;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::IntConst:
      if (a->ival != b->ival) return false;
      break;
    case ExprKind::RealConst:
      // Compare by value: "1.0" and "1." denote the same constant.
      if (std::bit_cast<std::uint32_t>(a->rval) != std::bit_cast<std::uint32_t>(b->rval)) return false;
      break;
    case ExprKind::LogicalConst:
      if (a->bval != b->bval) return false;
      break;
    case ExprKind::Var:
    case ExprKind::ArrayRef:
    case ExprKind::Call:
      if (a->name != b->name) return false;
      break;
    case ExprKind::Unary:
      if (a->uop != b->uop) return false;
      break;
    case ExprKind::Binary:
      if (a->bop != b->bop) return false;
      break;
  }
  if (a->args.size() != b->args.size()) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

bool equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!equal(a[i], b[i])) return false;
  }
  return true;
}

bool equal(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind || a.label != b.label) return false;
  switch (a.kind) {
    case StmtKind::Assign:
      return equal(a.lhs, b.lhs) && equal(a.rhs, b.rhs);
    case StmtKind::Do:
      return a.doLabel == b.doLabel && a.var == b.var && equal(a.lo, b.lo) && equal(a.hi, b.hi) &&
             equal(a.step, b.step) && equal(a.body, b.body);
    case StmtKind::If:
      return a.logicalIf == b.logicalIf && a.elseIf == b.elseIf && equal(a.cond, b.cond) &&
             equal(a.thenBody, b.thenBody) && equal(a.elseBody, b.elseBody);
    case StmtKind::Call: {
      if (a.callee != b.callee || a.args.size() != b.args.size()) return false;
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!equal(a.args[i], b.args[i])) return false;
      }
      return true;
    }
    case StmtKind::Return:
    case StmtKind::Continue:
      return true;
  }
  return false;
}

namespace {

bool equal_dims(const std::vector<Dim>& a, const std::vector<Dim>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // An omitted lower bound is 1.
    auto lo_a = a[i].lo ? a[i].lo : make_int(1);
    auto lo_b = b[i].lo ? b[i].lo : make_int(1);
    if (!equal(lo_a, lo_b) || !equal(a[i].hi, b[i].hi)) return false;
  }
  return true;
}

bool equal_decl(const Decl& a, const Decl& b) {
  return a.name == b.name && a.type == b.type && equal_dims(a.dims, b.dims) &&
         equal(a.paramValue, b.paramValue) && a.intent == b.intent;
}

}  // namespace

bool equal(const SourceUnit& a, const SourceUnit& b) {
  if (a.kind != b.kind || a.name != b.name || a.args != b.args || a.implicitNone != b.implicitNone ||
      a.moduleName != b.moduleName) {
    return false;
  }
  // Declarations compare as a set keyed by name; printers are free to
  // regroup type statements.
  if (a.decls.size() != b.decls.size()) return false;
  for (const auto& d : a.decls) {
    const Decl* o = b.find_decl(d.name);
    if (!o || !equal_decl(d, *o)) return false;
  }
  if (a.commonBlocks.size() != b.commonBlocks.size()) return false;
  for (std::size_t i = 0; i < a.commonBlocks.size(); ++i) {
    if (a.commonBlocks[i].name != b.commonBlocks[i].name || a.commonBlocks[i].vars != b.commonBlocks[i].vars) {
      return false;
    }
  }
  if (a.uses.size() != b.uses.size()) return false;
  for (std::size_t i = 0; i < a.uses.size(); ++i) {
    if (a.uses[i].module != b.uses[i].module || a.uses[i].only != b.uses[i].only) return false;
  }
  return equal(a.body, b.body);
}

bool equal(const ProgramAst& a, const ProgramAst& b) {
  if (a.units.size() != b.units.size()) return false;
  for (std::size_t i = 0; i < a.units.size(); ++i) {
    if (!equal(a.units[i], b.units[i])) return false;
  }
  return true;
}

const Decl* SourceUnit::find_decl(const std::string& n) const {
  for (const auto& d : decls) {
    if (d.name == n) return &d;
  }
  return nullptr;
}

Decl* SourceUnit::find_decl(const std::string& n) {
  for (auto& d : decls) {
    if (d.name == n) return &d;
  }
  return nullptr;
}

Decl& SourceUnit::decl_for(const std::string& n) {
  if (Decl* d = find_decl(n)) return *d;
  decls.push_back(Decl{n, std::nullopt, {}, nullptr, std::nullopt, {}});
  return decls.back();
}

bool SourceUnit::is_arg(const std::string& n) const {
  return std::find(args.begin(), args.end(), n) != args.end();
}

bool SourceUnit::is_array(const std::string& n) const {
  const Decl* d = find_decl(n);
  return d && !d->dims.empty();
}

std::optional<std::string> SourceUnit::common_block_of(const std::string& n) const {
  for (const auto& cb : commonBlocks) {
    if (std::find(cb.vars.begin(), cb.vars.end(), n) != cb.vars.end()) return cb.name;
  }
  return std::nullopt;
}

const SourceUnit& ProgramAst::program() const {
  for (const auto& u : units) {
    if (u.kind == UnitKind::Program) return u;
  }
  throw NoProgramUnit();
}

SourceUnit& ProgramAst::program() {
  for (auto& u : units) {
    if (u.kind == UnitKind::Program) return u;
  }
  throw NoProgramUnit();
}

const SourceUnit* ProgramAst::find_unit(const std::string& name) const {
  for (const auto& u : units) {
    if (u.name == name) return &u;
  }
  return nullptr;
}

SourceUnit* ProgramAst::find_unit(const std::string& name) {
  for (auto& u : units) {
    if (u.name == name) return &u;
  }
  return nullptr;
}

std::vector<std::string> ProgramAst::callees(const std::string& unit) const {
  std::vector<std::string> out;
  for (const auto& e : callGraph) {
    if (e.caller == unit && std::find(out.begin(), out.end(), e.callee) == out.end()) {
      out.push_back(e.callee);
    }
  }
  return out;
}

std::vector<std::string> ProgramAst::bottom_up_order() const {
  std::vector<std::string> order;
  std::set<std::string> done;
  std::set<std::string> active;
  std::function<void(const std::string&)> visit = [&](const std::string& u) {
    if (done.count(u) || active.count(u)) return;
    active.insert(u);
    for (const auto& c : callees(u)) visit(c);
    active.erase(u);
    done.insert(u);
    order.push_back(u);
  };
  for (const auto& u : units) visit(u.name);
  return order;
}

bool is_intrinsic(const std::string& name) {
  static const std::array<const char*, 5> kNames = {"abs", "min", "max", "sqrt", "mod"};
  return std::any_of(kNames.begin(), kNames.end(), [&](const char* n) { return name == n; });
}

BaseType implicit_type(const std::string& name) {
  char c = name.empty() ? 'a' : static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
  return (c >= 'i' && c <= 'n') ? BaseType::Integer : BaseType::Real;
}

void for_each_expr(const ExprPtr& e, const std::function<void(const Expr&)>& fn) {
  if (!e) return;
  fn(*e);
  for (const auto& a : e->args) for_each_expr(a, fn);
}

void for_each_stmt(const std::vector<Stmt>& stmts, const std::function<void(const Stmt&)>& fn) {
  for (const auto& s : stmts) {
    fn(s);
    for_each_stmt(s.body, fn);
    for_each_stmt(s.thenBody, fn);
    for_each_stmt(s.elseBody, fn);
  }
}

void for_each_expr_in(const std::vector<Stmt>& stmts, const std::function<void(const Expr&)>& fn) {
  for_each_stmt(stmts, [&](const Stmt& s) {
    for_each_expr(s.lhs, fn);
    for_each_expr(s.rhs, fn);
    for_each_expr(s.lo, fn);
    for_each_expr(s.hi, fn);
    for_each_expr(s.step, fn);
    for_each_expr(s.cond, fn);
    for (const auto& a : s.args) for_each_expr(a, fn);
  });
}

ExprPtr rewrite_expr(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  if (!e) return e;
  ExprPtr cur = e;
  if (!e->args.empty()) {
    std::vector<ExprPtr> args;
    bool changed = false;
    for (const auto& a : e->args) {
      args.push_back(rewrite_expr(a, fn));
      changed = changed || args.back() != a;
    }
    if (changed) {
      auto copy = std::make_shared<Expr>(*e);
      copy->args = std::move(args);
      cur = copy;
    }
  }
  if (ExprPtr r = fn(cur)) return r;
  return cur;
}

std::vector<Stmt> rewrite_exprs(std::vector<Stmt> stmts, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  for (auto& s : stmts) {
    s.lhs = rewrite_expr(s.lhs, fn);
    s.rhs = rewrite_expr(s.rhs, fn);
    s.lo = rewrite_expr(s.lo, fn);
    s.hi = rewrite_expr(s.hi, fn);
    s.step = rewrite_expr(s.step, fn);
    s.cond = rewrite_expr(s.cond, fn);
    for (auto& a : s.args) a = rewrite_expr(a, fn);
    s.body = rewrite_exprs(std::move(s.body), fn);
    s.thenBody = rewrite_exprs(std::move(s.thenBody), fn);
    s.elseBody = rewrite_exprs(std::move(s.elseBody), fn);
  }
  return stmts;
}

std::vector<Stmt> rename_vars(std::vector<Stmt> stmts, const std::map<std::string, std::string>& renames) {
  if (renames.empty()) return stmts;
  auto fn = [&](const ExprPtr& e) -> ExprPtr {
    if (e->kind != ExprKind::Var && e->kind != ExprKind::ArrayRef) return nullptr;
    auto it = renames.find(e->name);
    if (it == renames.end()) return nullptr;
    auto copy = std::make_shared<Expr>(*e);
    copy->name = it->second;
    return copy;
  };
  stmts = rewrite_exprs(std::move(stmts), fn);
  std::function<void(std::vector<Stmt>&)> fix_do = [&](std::vector<Stmt>& ss) {
    for (auto& s : ss) {
      if (s.kind == StmtKind::Do) {
        auto it = renames.find(s.var);
        if (it != renames.end()) s.var = it->second;
      }
      fix_do(s.body);
      fix_do(s.thenBody);
      fix_do(s.elseBody);
    }
  };
  fix_do(stmts);
  return stmts;
}

}  // namespace sf
