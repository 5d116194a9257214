#include <algorithm>
#include <set>
#include <sstream>

#include "streamfort/analyzer.hpp"

namespace sf {

const char* to_string(LoopKind k) {
  switch (k) {
    case LoopKind::Map: return "map";
    case LoopKind::Fold: return "fold";
    case LoopKind::Sequential: return "sequential";
  }
  return "?";
}

const char* to_string(FoldOp op) {
  switch (op) {
    case FoldOp::Add: return "+";
    case FoldOp::Mul: return "*";
    case FoldOp::Min: return "min";
    case FoldOp::Max: return "max";
  }
  return "?";
}

namespace {

std::string offset_text(const Offset& o) {
  if (o.size() == 1) return std::to_string(o[0]);
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < o.size(); ++i) os << (i ? "," : "") << o[i];
  os << ")";
  return os.str();
}

class NestClassifier {
 public:
  NestClassifier(const SourceUnit& scope, const Stmt& nest) : scope_(scope), params_(parameter_values(scope)) {
    const Stmt* s = &nest;
    for (;;) {
      out_.loopVars.push_back(s->var);
      loops_.push_back(s);
      if (s->body.size() == 1 && s->body[0].kind == StmtKind::Do) {
        s = &s->body[0];
        continue;
      }
      break;
    }
    body_ = &s->body;
  }

  NestAnalysis run() {
    if (auto why = structural_problem()) return sequential(*why);
    collect_accesses(*body_, {});
    scalars();
    for (const auto& a : out_.accesses) {
      if (a.opaque) return sequential("opaque subscript on '" + a.array + "'");
    }
    for (const auto& a : out_.accesses) {
      if (!a.write) continue;
      Offset zero(out_.loopVars.size(), 0);
      for (const auto& o : a.offsets) {
        if (o != zero) return sequential("write to '" + a.array + "' at offset " + offset_text(o));
      }
      for (const auto& r : out_.accesses) {
        if (r.write || r.array != a.array) continue;
        for (const auto& o : r.offsets) {
          if (o != zero) return sequential(a.array + " carried at offset " + offset_text(o));
        }
      }
    }
    if (carried_.empty()) {
      out_.cls.kind = LoopKind::Map;
      return out_;
    }
    bool writes = std::any_of(out_.accesses.begin(), out_.accesses.end(), [](const AccessPattern& a) { return a.write; });
    if (carried_.size() == 1 && !writes) {
      if (auto op = fold_op(*carried_.begin())) {
        out_.cls.kind = LoopKind::Fold;
        out_.cls.accumulator = *carried_.begin();
        out_.cls.op = *op;
        return out_;
      }
    }
    std::string names;
    for (const auto& c : carried_) names += (names.empty() ? "'" : ", '") + c + "'";
    return sequential((carried_.size() == 1 ? "scalar " : "scalars ") + names + " carried across iterations");
  }

 private:
  NestAnalysis sequential(const std::string& why) {
    out_.cls.kind = LoopKind::Sequential;
    out_.cls.reason = why;
    return out_;
  }

  std::optional<std::string> structural_problem() {
    for (const Stmt* l : loops_) {
      for (const auto& b : {l->lo, l->hi, l->step}) {
        if (b && !const_eval(b, params_)) return "loop bounds of '" + l->var + "' are not constant";
      }
    }
    std::optional<std::string> why;
    std::set<std::string> vars(out_.loopVars.begin(), out_.loopVars.end());
    for_each_stmt(*body_, [&](const Stmt& s) {
      if (why) return;
      if (s.kind == StmtKind::Do) why = "imperfectly nested loop over '" + s.var + "'";
      if (s.kind == StmtKind::Call) why = "call to '" + s.callee + "' inside the nest";
      if (s.kind == StmtKind::Return) why = "RETURN inside the nest";
      if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::Var && vars.count(s.lhs->name)) {
        why = "assignment to induction variable '" + s.lhs->name + "'";
      }
    });
    if (why) return why;
    for_each_expr_in(*body_, [&](const Expr& e) {
      if (!why && e.kind == ExprKind::Call && !is_intrinsic(e.name)) why = "call to '" + e.name + "' inside the nest";
    });
    return why;
  }

  std::optional<int> subscript_offset(const ExprPtr& e, const std::string& var) const {
    if (e->kind == ExprKind::Var && e->name == var) return 0;
    if (e->kind != ExprKind::Binary || (e->bop != BinOp::Add && e->bop != BinOp::Sub)) return std::nullopt;
    const ExprPtr& l = e->args[0];
    const ExprPtr& r = e->args[1];
    if (l->kind == ExprKind::Var && l->name == var) {
      auto c = const_eval(r, params_);
      if (!c || c->type != BaseType::Integer) return std::nullopt;
      return e->bop == BinOp::Add ? c->as_int() : -c->as_int();
    }
    if (e->bop == BinOp::Add && r->kind == ExprKind::Var && r->name == var) {
      auto c = const_eval(l, params_);
      if (!c || c->type != BaseType::Integer) return std::nullopt;
      return c->as_int();
    }
    return std::nullopt;
  }

  void record(const Expr& ref, bool write) {
    AccessPattern* ap = nullptr;
    for (auto& a : out_.accesses) {
      if (a.array == ref.name && a.write == write) ap = &a;
    }
    if (!ap) {
      out_.accesses.push_back(AccessPattern{ref.name, write, {}, false});
      ap = &out_.accesses.back();
    }
    if (ref.args.size() != out_.loopVars.size()) {
      ap->opaque = true;
      return;
    }
    Offset o;
    for (std::size_t d = 0; d < ref.args.size(); ++d) {
      auto c = subscript_offset(ref.args[d], out_.loopVars[d]);
      if (!c) {
        ap->opaque = true;
        return;
      }
      o.push_back(*c);
    }
    if (std::find(ap->offsets.begin(), ap->offsets.end(), o) == ap->offsets.end()) {
      ap->offsets.push_back(o);
      std::sort(ap->offsets.begin(), ap->offsets.end());
    }
  }

  bool at_center(const Expr& ref) const {
    if (ref.args.size() != out_.loopVars.size()) return false;
    for (std::size_t d = 0; d < ref.args.size(); ++d) {
      auto c = subscript_offset(ref.args[d], out_.loopVars[d]);
      if (!c || *c != 0) return false;
    }
    return true;
  }

  void reads(const ExprPtr& e, const std::set<std::string>& own) {
    if (!e) return;
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind == ExprKind::ArrayRef && !(own.count(x.name) && at_center(x))) record(x, false);
    });
  }

  /// `own`: arrays whose centre element this iteration has certainly
  /// written already; reading it back is not an input.
  std::set<std::string> collect_accesses(const std::vector<Stmt>& body, std::set<std::string> own) {
    for (const auto& s : body) {
      switch (s.kind) {
        case StmtKind::Assign:
          reads(s.rhs, own);
          if (s.lhs->kind == ExprKind::ArrayRef) {
            for (const auto& a : s.lhs->args) reads(a, own);
            record(*s.lhs, true);
            if (at_center(*s.lhs)) own.insert(s.lhs->name);
          }
          break;
        case StmtKind::If: {
          reads(s.cond, own);
          auto t = collect_accesses(s.thenBody, own);
          auto f = collect_accesses(s.elseBody, own);
          std::set<std::string> both;
          std::set_intersection(t.begin(), t.end(), f.begin(), f.end(), std::inserter(both, both.begin()));
          own = both;
          break;
        }
        default:
          break;
      }
    }
    return own;
  }

  bool is_scalar_var(const std::string& n) const {
    if (params_.count(n) || scope_.is_array(n)) return false;
    return std::find(out_.loopVars.begin(), out_.loopVars.end(), n) == out_.loopVars.end();
  }

  void scalar_reads(const ExprPtr& e, const std::set<std::string>& defined) {
    if (!e) return;
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind != ExprKind::Var || !is_scalar_var(x.name)) return;
      read_.insert(x.name);
      if (!defined.count(x.name)) exposed_.insert(x.name);
    });
  }

  std::set<std::string> walk(const std::vector<Stmt>& body, std::set<std::string> defined) {
    for (const auto& s : body) {
      if (s.kind == StmtKind::Assign) {
        scalar_reads(s.rhs, defined);
        for (const auto& a : s.lhs->args) scalar_reads(a, defined);
        if (s.lhs->kind == ExprKind::Var) {
          assigned_.insert(s.lhs->name);
          if (std::find(order_.begin(), order_.end(), s.lhs->name) == order_.end()) order_.push_back(s.lhs->name);
          defined.insert(s.lhs->name);
        }
      } else if (s.kind == StmtKind::If) {
        scalar_reads(s.cond, defined);
        auto t = walk(s.thenBody, defined);
        auto f = walk(s.elseBody, defined);
        std::set<std::string> both;
        std::set_intersection(t.begin(), t.end(), f.begin(), f.end(), std::inserter(both, both.begin()));
        defined = both;
      }
    }
    return defined;
  }

  void scalars() {
    walk(*body_, {});
    for (const auto& n : order_) {
      if (exposed_.count(n)) carried_.insert(n);
      else out_.privates.push_back(n);
    }
    for_each_expr_in(*body_, [&](const Expr& x) {
      if (x.kind == ExprKind::Var && is_scalar_var(x.name) && !assigned_.count(x.name) &&
          std::find(out_.scalarInputs.begin(), out_.scalarInputs.end(), x.name) == out_.scalarInputs.end()) {
        out_.scalarInputs.push_back(x.name);
      }
    });
  }

  static bool mentions(const ExprPtr& e, const std::string& n) {
    bool hit = false;
    for_each_expr(e, [&](const Expr& x) { hit = hit || (x.kind == ExprKind::Var && x.name == n); });
    return hit;
  }

  std::optional<FoldOp> fold_op(const std::string& acc) const {
    std::optional<FoldOp> op;
    bool ok = true;
    for_each_stmt(*body_, [&](const Stmt& s) {
      if (!ok) return;
      if (s.kind == StmtKind::If && mentions(s.cond, acc)) ok = false;
      if (s.kind != StmtKind::Assign) return;
      bool lhs_is_acc = s.lhs->kind == ExprKind::Var && s.lhs->name == acc;
      if (!lhs_is_acc) {
        if (mentions(s.rhs, acc)) ok = false;
        return;
      }
      const Expr& r = *s.rhs;
      std::optional<FoldOp> here;
      if (r.kind == ExprKind::Binary && (r.bop == BinOp::Add || r.bop == BinOp::Mul)) {
        const ExprPtr& a = r.args[0];
        const ExprPtr& b = r.args[1];
        bool left = a->kind == ExprKind::Var && a->name == acc && !mentions(b, acc);
        bool right = b->kind == ExprKind::Var && b->name == acc && !mentions(a, acc);
        if (left || right) here = r.bop == BinOp::Add ? FoldOp::Add : FoldOp::Mul;
      } else if (r.kind == ExprKind::Call && (r.name == "min" || r.name == "max") && r.args.size() == 2) {
        const ExprPtr& a = r.args[0];
        const ExprPtr& b = r.args[1];
        bool left = a->kind == ExprKind::Var && a->name == acc && !mentions(b, acc);
        bool right = b->kind == ExprKind::Var && b->name == acc && !mentions(a, acc);
        if (left || right) here = r.name == "min" ? FoldOp::Min : FoldOp::Max;
      }
      if (!here || (op && *op != *here)) {
        ok = false;
        return;
      }
      op = here;
    });
    if (!ok) return std::nullopt;
    return op;
  }

  const SourceUnit& scope_;
  ParamValues params_;
  NestAnalysis out_;
  std::vector<const Stmt*> loops_;
  const std::vector<Stmt>* body_ = nullptr;
  std::set<std::string> assigned_;
  std::set<std::string> exposed_;
  std::set<std::string> read_;
  std::set<std::string> carried_;
  std::vector<std::string> order_;
};

}  // namespace

NestAnalysis classify_loop_nest(const SourceUnit& scope, const Stmt& nest) {
  return NestClassifier(scope, nest).run();
}

}  // namespace sf
