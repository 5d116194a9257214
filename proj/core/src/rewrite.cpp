#include <algorithm>
#include <set>

#include "streamfort/analyzer.hpp"

namespace sf {

namespace {

using Renames = std::map<std::string, std::string>;

std::set<std::string> names_in(const std::vector<Stmt>& code) {
  std::set<std::string> out;
  for_each_expr_in(code, [&](const Expr& e) {
    if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) out.insert(e.name);
  });
  for_each_stmt(code, [&](const Stmt& s) {
    if (s.kind == StmtKind::Do) out.insert(s.var);
  });
  return out;
}

ExprPtr index_expr(const std::string& var, std::int64_t off) {
  if (off == 0) return make_var(var);
  if (off > 0) return make_binary(BinOp::Add, make_var(var), make_int(static_cast<std::int32_t>(off)));
  return make_binary(BinOp::Sub, make_var(var), make_int(static_cast<std::int32_t>(-off)));
}

/// Substitute loop variable `from[d]` by `to[d] + shift[d]`, folding the
/// shift into `var +- const` subscripts.
ExprPtr shift_expr(const ExprPtr& e, const std::vector<std::string>& from, const std::vector<std::string>& to,
                   const Offset& shift) {
  if (!e) return e;
  auto slot = [&](const Expr& x) -> int {
    if (x.kind != ExprKind::Var) return -1;
    for (std::size_t d = 0; d < from.size(); ++d) {
      if (from[d] == x.name) return static_cast<int>(d);
    }
    return -1;
  };
  if (int d = slot(*e); d >= 0) return index_expr(to[static_cast<std::size_t>(d)], shift[static_cast<std::size_t>(d)]);
  if (e->kind == ExprKind::Binary && (e->bop == BinOp::Add || e->bop == BinOp::Sub) &&
      e->args[1]->kind == ExprKind::IntConst) {
    if (int d = slot(*e->args[0]); d >= 0) {
      std::int64_t c = e->bop == BinOp::Add ? e->args[1]->ival : -e->args[1]->ival;
      return index_expr(to[static_cast<std::size_t>(d)], c + shift[static_cast<std::size_t>(d)]);
    }
  }
  if (e->args.empty()) return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto& a : copy->args) a = shift_expr(a, from, to, shift);
  return copy;
}

std::vector<Stmt> shift_stmts(std::vector<Stmt> stmts, const std::vector<std::string>& from,
                              const std::vector<std::string>& to, const Offset& shift) {
  for (auto& s : stmts) {
    s.lhs = shift_expr(s.lhs, from, to, shift);
    s.rhs = shift_expr(s.rhs, from, to, shift);
    s.cond = shift_expr(s.cond, from, to, shift);
    s.thenBody = shift_stmts(std::move(s.thenBody), from, to, shift);
    s.elseBody = shift_stmts(std::move(s.elseBody), from, to, shift);
  }
  return stmts;
}

Stmt make_nest(const std::vector<std::string>& vars, const Domain& dom, std::vector<Stmt> body) {
  for (std::size_t d = vars.size(); d-- > 0;) {
    Stmt loop;
    loop.kind = StmtKind::Do;
    loop.var = vars[d];
    loop.lo = make_int(static_cast<std::int32_t>(dom.lo[d]));
    loop.hi = make_int(static_cast<std::int32_t>(dom.hi[d]));
    loop.body = std::move(body);
    body = {std::move(loop)};
  }
  return std::move(body[0]);
}

std::string offset_tag(const Offset& o) {
  std::string s;
  for (int x : o) {
    if (!s.empty()) s += "_";
    s += x == 0 ? "0" : (x > 0 ? "p" : "m") + std::to_string(std::abs(x));
  }
  return s;
}

std::string fresh(const std::string& base, std::set<std::string>& taken) {
  std::string n = base;
  for (int i = 2; taken.count(n); ++i) n = base + std::to_string(i);
  taken.insert(n);
  return n;
}

void merge_decls(SourceUnit& into, const SourceUnit& from, const Renames& rn = {}) {
  for (const auto& d : from.decls) {
    Decl c = d;
    if (auto it = rn.find(d.name); it != rn.end()) c.name = it->second;
    if (!into.find_decl(c.name)) into.decls.push_back(std::move(c));
  }
}

/// Finish a rewritten Map candidate: classify and fill the access sets.
std::optional<IrNode> finish(IrNode n) {
  NestAnalysis na = classify_loop_nest(n.scope, n.code[0]);
  if (na.cls.kind != LoopKind::Map) return std::nullopt;
  n.kind = NodeKind::Map;
  n.inputs.clear();
  n.outputs.clear();
  for (const auto& a : na.accesses) (a.write ? n.outputs : n.inputs).push_back(a);
  n.privates = na.privates;
  n.scalarInputs = na.scalarInputs;
  std::set<std::string> used = names_in(n.code);
  std::erase_if(n.scope.decls, [&](const Decl& d) { return !used.count(d.name); });
  return n;
}

class Rewriter {
 public:
  explicit Rewriter(FunctionalIR ir) : ir_(std::move(ir)) {}

  FunctionalIR run(const RewriteRules& rules) {
    rebuild_edges(ir_);
    std::size_t budget = ir_.nodes.size() * ir_.nodes.size() + 1;
    for (std::size_t it = 0; it < budget; ++it) {
      bool changed = rules.fission ? fission_once() : (rules.fuse && fuse_once());
      if (!changed) break;
      rebuild_edges(ir_);
    }
    return std::move(ir_);
  }

 private:
  bool touches(const IrNode& n, const std::string& a) const { return n.input(a) || n.output(a); }

  bool referenced_on_host(const std::string& a) const {
    bool hit = false;
    for_each_expr_in(ir_.epilogue, [&](const Expr& e) { hit = hit || e.name == a; });
    return hit;
  }

  bool dead_outside(const std::string& a, std::size_t f, std::size_t g) const {
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      if (i != f && i != g && touches(ir_.nodes[i], a)) return false;
    }
    for (const auto& e : ir_.carried) {
      if (e.array == a) return false;
    }
    return !referenced_on_host(a);
  }

  bool fuse_once() {
    for (std::size_t gi = 0; gi < ir_.nodes.size(); ++gi) {
      std::set<int> producers;
      for (const auto& e : ir_.edges) {
        if (e.to == static_cast<int>(gi)) producers.insert(e.from);
      }
      if (producers.size() != 1) continue;
      auto fi = static_cast<std::size_t>(*producers.begin());
      if (auto fused = try_fuse(fi, gi)) {
        ir_.nodes[gi] = std::move(*fused);
        ir_.nodes.erase(ir_.nodes.begin() + static_cast<std::ptrdiff_t>(fi));
        return true;
      }
    }
    return false;
  }

  std::optional<IrNode> try_fuse(std::size_t fi, std::size_t gi) const {
    const IrNode& f = ir_.nodes[fi];
    const IrNode& g = ir_.nodes[gi];
    if (f.kind != NodeKind::Map || g.kind != NodeKind::Map) return std::nullopt;
    if (f.stenciled() && g.stenciled()) return std::nullopt;
    if (f.loopVars.size() != g.loopVars.size()) return std::nullopt;
    for (const auto& e : ir_.edges) {
      if (e.from == static_cast<int>(fi) && e.to != static_cast<int>(gi)) return std::nullopt;
    }
    for (const auto& e : ir_.carried) {
      if (e.from == static_cast<int>(fi)) return std::nullopt;
    }
    for (std::size_t k = fi + 1; k < gi; ++k) {
      for (const auto& a : f.inputs) {
        if (touches(ir_.nodes[k], a.array)) return std::nullopt;
      }
      for (const auto& a : f.outputs) {
        if (touches(ir_.nodes[k], a.array)) return std::nullopt;
      }
    }
    bool pointwise = f.domain == g.domain;
    for (const auto& out : f.outputs) {
      if (const AccessPattern* r = g.input(out.array)) {
        Offset zero(g.loopVars.size(), 0);
        pointwise = pointwise && r->offsets.size() == 1 && r->offsets[0] == zero;
      }
    }
    return pointwise ? concatenate(f, g) : compose(fi, gi);
  }

  std::optional<IrNode> concatenate(const IrNode& f, const IrNode& g) const {
    std::set<std::string> taken = names_in(g.code);
    Renames rn;
    for (const auto& p : f.privates) {
      if (taken.count(p)) rn[p] = fresh(p + "_" + f.name, taken);
    }
    std::vector<Stmt> body = rename_vars(f.elemental(), rn);
    Offset zero(g.loopVars.size(), 0);
    body = shift_stmts(std::move(body), f.loopVars, g.loopVars, zero);
    for (const auto& s : g.elemental()) body.push_back(s);
    IrNode n;
    n.name = f.name + "_" + g.name;
    n.loopVars = g.loopVars;
    n.domain = g.domain;
    n.code = {make_nest(g.loopVars, g.domain, std::move(body))};
    n.scope = g.scope;
    n.scope.name = n.name;
    merge_decls(n.scope, f.scope, rn);
    return finish(std::move(n));
  }

  /// g reads outputs of a point-wise f through a stencil: recompute f at
  /// every offset g needs, into privates, instead of materializing it.
  std::optional<IrNode> compose(std::size_t fi, std::size_t gi) const {
    const IrNode& f = ir_.nodes[fi];
    const IrNode& g = ir_.nodes[gi];
    if (f.stenciled()) return std::nullopt;
    std::set<std::string> outs;
    for (const auto& o : f.outputs) {
      if (f.input(o.array) || !dead_outside(o.array, fi, gi)) return std::nullopt;
      outs.insert(o.array);
    }
    std::set<std::string> unconditional;
    for (const auto& s : f.elemental()) {
      if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::ArrayRef) unconditional.insert(s.lhs->name);
    }
    if (unconditional != outs) return std::nullopt;

    std::set<Offset> offsets;
    for (const auto& a : outs) {
      if (const AccessPattern* r = g.input(a)) offsets.insert(r->offsets.begin(), r->offsets.end());
    }
    std::set<std::string> taken = names_in(g.code);
    for (const auto& x : names_in(f.code)) taken.insert(x);
    std::vector<Stmt> body;
    std::map<std::pair<std::string, Offset>, std::string> slot;
    IrNode n;
    n.scope = g.scope;
    merge_decls(n.scope, f.scope);
    for (const auto& o : offsets) {
      std::string tag = offset_tag(o);
      Renames rn;
      for (const auto& p : f.privates) {
        rn[p] = fresh(p + "_" + tag, taken);
        Decl d = *f.scope.find_decl(p);
        d.name = rn[p];
        n.scope.decls.push_back(d);
      }
      for (const auto& a : outs) {
        std::string v = fresh(a + "_" + tag, taken);
        slot[{a, o}] = v;
        Decl d;
        d.name = v;
        d.type = ir_.type_of(a);
        n.scope.decls.push_back(d);
      }
      auto to_slot = [&](const ExprPtr& e) -> ExprPtr {
        if (e->kind == ExprKind::ArrayRef && outs.count(e->name)) return make_var(slot[{e->name, o}]);
        return nullptr;
      };
      std::vector<Stmt> shifted = shift_stmts(rename_vars(f.elemental(), rn), f.loopVars, g.loopVars, o);
      for (auto& s : shifted) {
        if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::ArrayRef && outs.count(s.lhs->name)) {
          s.lhs = make_var(slot[{s.lhs->name, o}]);
        }
      }
      shifted = rewrite_exprs(std::move(shifted), to_slot);

      ExprPtr guard;
      for (std::size_t d = 0; d < o.size(); ++d) {
        std::int64_t lo = f.domain.lo[d] - o[d];
        std::int64_t hi = f.domain.hi[d] - o[d];
        auto var = make_var(g.loopVars[d]);
        auto add = [&](ExprPtr c) { guard = guard ? make_binary(BinOp::And, guard, c) : c; };
        if (g.domain.lo[d] < lo) add(make_binary(BinOp::Ge, var, make_int(static_cast<std::int32_t>(lo))));
        if (g.domain.hi[d] > hi) add(make_binary(BinOp::Le, var, make_int(static_cast<std::int32_t>(hi))));
      }
      if (!guard) {
        for (auto& s : shifted) body.push_back(std::move(s));
        continue;
      }
      Stmt s;
      s.kind = StmtKind::If;
      s.cond = guard;
      s.thenBody = std::move(shifted);
      for (const auto& a : outs) {
        std::vector<ExprPtr> sub;
        for (std::size_t d = 0; d < o.size(); ++d) sub.push_back(index_expr(g.loopVars[d], o[d]));
        Stmt keep;
        keep.kind = StmtKind::Assign;
        keep.lhs = make_var(slot[{a, o}]);
        keep.rhs = make_array_ref(a, std::move(sub));
        s.elseBody.push_back(std::move(keep));
      }
      body.push_back(std::move(s));
    }
    bool plain = true;
    std::vector<Stmt> tail = g.elemental();
    tail = rewrite_exprs(std::move(tail), [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind != ExprKind::ArrayRef || !outs.count(e->name)) return nullptr;
      Offset o;
      for (const auto& x : e->args) {
        if (x->kind == ExprKind::Var) {
          o.push_back(0);
        } else if (x->kind == ExprKind::Binary && x->args[1]->kind == ExprKind::IntConst) {
          o.push_back(x->bop == BinOp::Add ? x->args[1]->ival : -x->args[1]->ival);
        } else {
          plain = false;
          return nullptr;
        }
      }
      auto it = slot.find({e->name, o});
      if (it == slot.end()) {
        plain = false;
        return nullptr;
      }
      return make_var(it->second);
    });
    if (!plain) return std::nullopt;
    for (auto& s : tail) body.push_back(std::move(s));
    n.name = f.name + "_" + g.name;
    n.scope.name = n.name;
    n.loopVars = g.loopVars;
    n.domain = g.domain;
    n.code = {make_nest(g.loopVars, g.domain, std::move(body))};
    return finish(std::move(n));
  }

  bool fission_once() {
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      const IrNode& n = ir_.nodes[i];
      if (n.kind != NodeKind::Map) continue;
      const auto& body = n.elemental();
      for (std::size_t cut = 1; cut < body.size(); ++cut) {
        std::vector<Stmt> a(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(cut));
        std::vector<Stmt> b(body.begin() + static_cast<std::ptrdiff_t>(cut), body.end());
        std::set<std::string> na = names_in(a);
        std::set<std::string> nb = names_in(b);
        bool shares = std::any_of(n.privates.begin(), n.privates.end(),
                                  [&](const std::string& p) { return na.count(p) && nb.count(p); });
        if (shares) continue;
        auto part = [&](std::vector<Stmt> stmts, int k) {
          IrNode p;
          p.name = n.name + "_" + std::to_string(k);
          p.loopVars = n.loopVars;
          p.domain = n.domain;
          p.scope = n.scope;
          p.scope.name = p.name;
          p.code = {make_nest(n.loopVars, n.domain, std::move(stmts))};
          return finish(std::move(p));
        };
        auto first = part(a, 1);
        auto second = part(b, 2);
        if (!first || !second) continue;
        ir_.nodes[i] = std::move(*second);
        ir_.nodes.insert(ir_.nodes.begin() + static_cast<std::ptrdiff_t>(i), std::move(*first));
        return true;
      }
    }
    return false;
  }

  FunctionalIR ir_;
};

}  // namespace

FunctionalIR rewrite_ir(FunctionalIR ir, const RewriteRules& rules) { return Rewriter(std::move(ir)).run(rules); }

}  // namespace sf
