#include "streamfort/elemental.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "streamfort/errors.hpp"

namespace sf {

class ElementalCompiler {
 public:
  explicit ElementalCompiler(const IrNode& node) : node_(node), params_(parameter_values(node.scope)) {}

  Elemental run() {
    if (node_.kind == NodeKind::Seq) throw LoweringError("node '" + node_.name + "' has no elemental function");
    const auto& body = node_.elemental();
    for_each_stmt(body, [&](const Stmt& s) {
      if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::ArrayRef) add_output(s.lhs->name);
    });
    auto own = scan(body, {});
    for (const auto& w : out_.writes_) {
      if (!own.count(w)) prior_.insert(w);
      out_.mustWrite_.push_back(own.count(w) > 0);
    }
    layout();
    out_.body_ = compile(body);
    return std::move(out_);
  }

 private:
  void add_output(const std::string& a) {
    if (std::find(out_.writes_.begin(), out_.writes_.end(), a) == out_.writes_.end()) out_.writes_.push_back(a);
  }
  bool is_output(const std::string& a) const {
    return std::find(out_.writes_.begin(), out_.writes_.end(), a) != out_.writes_.end();
  }

  Offset offset_of(const Expr& ref) const {
    if (ref.args.size() != node_.loopVars.size()) {
      throw LoweringError("subscript of '" + ref.name + "' in '" + node_.name + "' does not follow the loop nest");
    }
    Offset o;
    for (std::size_t d = 0; d < ref.args.size(); ++d) {
      const ExprPtr& e = ref.args[d];
      const std::string& v = node_.loopVars[d];
      std::optional<Value> c;
      int sign = 1;
      if (e->kind == ExprKind::Var && e->name == v) {
        o.push_back(0);
        continue;
      }
      if (e->kind == ExprKind::Binary && (e->bop == BinOp::Add || e->bop == BinOp::Sub)) {
        if (e->args[0]->kind == ExprKind::Var && e->args[0]->name == v) {
          c = const_eval(e->args[1], params_);
          sign = e->bop == BinOp::Add ? 1 : -1;
        } else if (e->bop == BinOp::Add && e->args[1]->kind == ExprKind::Var && e->args[1]->name == v) {
          c = const_eval(e->args[0], params_);
        }
      }
      if (!c || c->type != BaseType::Integer) {
        throw LoweringError("subscript of '" + ref.name + "' in '" + node_.name + "' is not a constant offset");
      }
      o.push_back(sign * c->as_int());
    }
    return o;
  }

  static bool centre(const Offset& o) {
    return std::all_of(o.begin(), o.end(), [](int x) { return x == 0; });
  }

  void note_read(const Expr& ref, const std::set<std::string>& own) {
    Offset o = offset_of(ref);
    if (is_output(ref.name)) {
      if (!centre(o)) throw LoweringError("'" + ref.name + "' is read off-centre in '" + node_.name + "'");
      if (!own.count(ref.name)) prior_.insert(ref.name);
      return;
    }
    ElementalRead r{ref.name, o};
    if (std::find(reads_.begin(), reads_.end(), r) == reads_.end()) reads_.push_back(r);
  }

  void reads_in(const ExprPtr& e, const std::set<std::string>& own) {
    if (!e) return;
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind == ExprKind::ArrayRef) note_read(x, own);
    });
  }

  std::set<std::string> scan(const std::vector<Stmt>& body, std::set<std::string> own) {
    for (const auto& s : body) {
      if (s.kind == StmtKind::Assign) {
        reads_in(s.rhs, own);
        if (s.lhs->kind == ExprKind::ArrayRef) {
          if (!centre(offset_of(*s.lhs))) throw LoweringError("off-centre write to '" + s.lhs->name + "'");
          own.insert(s.lhs->name);
        } else {
          note_scalar(s.lhs->name);
        }
      } else if (s.kind == StmtKind::If) {
        reads_in(s.cond, own);
        auto t = scan(s.thenBody, own);
        auto f = scan(s.elseBody, own);
        std::set<std::string> both;
        std::set_intersection(t.begin(), t.end(), f.begin(), f.end(), std::inserter(both, both.begin()));
        own = both;
      } else if (s.kind != StmtKind::Continue) {
        throw LoweringError("statement kind not allowed in the elemental body of '" + node_.name + "'");
      }
    }
    return own;
  }

  void note_scalar(const std::string& n) {
    if (std::find(locals_.begin(), locals_.end(), n) == locals_.end()) locals_.push_back(n);
  }

  void layout() {
    // Reads first, then one prior read per output that needs it.
    out_.reads_ = reads_;
    for (const auto& w : out_.writes_) {
      int idx = -1;
      if (prior_.count(w)) {
        ElementalRead r{w, Offset(node_.loopVars.size(), 0)};
        idx = static_cast<int>(out_.reads_.size());
        out_.reads_.push_back(r);
      }
      out_.priorOf_.push_back(idx);
    }
    int n = 0;
    for (const auto& r : out_.reads_) {
      slots_[key(r.array, r.offset)] = n++;
      out_.slotTypes_.push_back(type_of(node_.scope, r.array));
    }
    out_.outBase_ = n;
    for (const auto& w : out_.writes_) {
      slots_[key(w, Offset(node_.loopVars.size(), 0))] = n++;
      out_.writeTypes_.push_back(type_of(node_.scope, w));
      out_.slotTypes_.push_back(out_.writeTypes_.back());
    }
    out_.scalarBase_ = n;
    out_.scalarNames_ = node_.scalarInputs;
    for (const auto& s : out_.scalarNames_) {
      scalarSlots_[s] = n++;
      out_.slotTypes_.push_back(type_of(node_.scope, s));
    }
    out_.loopBase_ = n;
    out_.loopVars_ = node_.loopVars;
    for (const auto& v : node_.loopVars) {
      scalarSlots_[v] = n++;
      out_.slotTypes_.push_back(BaseType::Integer);
    }
    if (node_.kind == NodeKind::Fold) {
      out_.accSlot_ = n;
      scalarSlots_[node_.accumulator] = n++;
      out_.slotTypes_.push_back(type_of(node_.scope, node_.accumulator));
    }
    for (const auto& l : locals_) {
      if (scalarSlots_.count(l)) continue;
      scalarSlots_[l] = n++;
      out_.slotTypes_.push_back(type_of(node_.scope, l));
    }
  }

  static std::string key(const std::string& a, const Offset& o) {
    std::string k = a;
    for (int x : o) k += "," + std::to_string(x);
    return k;
  }

  int add(Elemental::Node n) {
    out_.nodes_.push_back(std::move(n));
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  int scalar_slot(const std::string& name) {
    auto it = scalarSlots_.find(name);
    if (it != scalarSlots_.end()) return it->second;
    // Read but neither assigned nor declared an input: an undefined
    // private. It starts at zero like the evaluator's locals.
    int n = static_cast<int>(out_.slotTypes_.size());
    scalarSlots_[name] = n;
    out_.slotTypes_.push_back(type_of(node_.scope, name));
    return n;
  }

  int expr(const ExprPtr& ep) {
    const Expr& e = *ep;
    Elemental::Node n;
    switch (e.kind) {
      case ExprKind::IntConst: n.value = Value::integer(e.ival); break;
      case ExprKind::RealConst: n.value = Value::real(e.rval); break;
      case ExprKind::LogicalConst: n.value = Value::logical(e.bval); break;
      case ExprKind::Var: {
        auto p = params_.find(e.name);
        if (p != params_.end()) {
          n.value = p->second;
        } else {
          n.op = Elemental::Node::Op::Slot;
          n.slot = scalar_slot(e.name);
        }
        break;
      }
      case ExprKind::ArrayRef:
        n.op = Elemental::Node::Op::Slot;
        n.slot = slots_.at(key(e.name, offset_of(e)));
        break;
      case ExprKind::Call:
        if (!is_intrinsic(e.name)) throw LoweringError("call to '" + e.name + "' in an elemental body");
        n.op = Elemental::Node::Op::Intrinsic;
        n.name = e.name;
        for (const auto& a : e.args) n.kids.push_back(expr(a));
        break;
      case ExprKind::Unary:
        n.op = Elemental::Node::Op::Unary;
        n.uop = e.uop;
        n.kids.push_back(expr(e.args[0]));
        break;
      case ExprKind::Binary:
        n.op = Elemental::Node::Op::Binary;
        n.bop = e.bop;
        n.kids.push_back(expr(e.args[0]));
        n.kids.push_back(expr(e.args[1]));
        break;
    }
    return add(std::move(n));
  }

  std::vector<Elemental::Step> compile(const std::vector<Stmt>& body) {
    std::vector<Elemental::Step> out;
    for (const auto& s : body) {
      Elemental::Step st;
      if (s.kind == StmtKind::Assign) {
        st.expr = expr(s.rhs);
        st.slot = s.lhs->kind == ExprKind::ArrayRef ? slots_.at(key(s.lhs->name, offset_of(*s.lhs)))
                                                    : scalar_slot(s.lhs->name);
      } else if (s.kind == StmtKind::If) {
        st.branch = true;
        st.expr = expr(s.cond);
        st.then = compile(s.thenBody);
        st.otherwise = compile(s.elseBody);
      } else {
        continue;
      }
      out.push_back(std::move(st));
    }
    return out;
  }

  const IrNode& node_;
  ParamValues params_;
  Elemental out_;
  std::vector<ElementalRead> reads_;
  std::set<std::string> prior_;
  std::vector<std::string> locals_;
  std::map<std::string, int> slots_;
  std::map<std::string, int> scalarSlots_;
};

Elemental Elemental::compile(const IrNode& node) { return ElementalCompiler(node).run(); }

Value Elemental::eval(int n, std::vector<Value>& vars) const {
  const Node& x = nodes_[static_cast<std::size_t>(n)];
  switch (x.op) {
    case Node::Op::Const: return x.value;
    case Node::Op::Slot: return vars[static_cast<std::size_t>(x.slot)];
    case Node::Op::Unary: return apply_unary(x.uop, eval(x.kids[0], vars));
    case Node::Op::Binary: {
      Value a = eval(x.kids[0], vars);
      Value b = eval(x.kids[1], vars);
      return apply_binary(x.bop, a, b);
    }
    case Node::Op::Intrinsic: {
      Value args[4];
      std::size_t k = std::min<std::size_t>(x.kids.size(), 4);
      for (std::size_t i = 0; i < k; ++i) args[i] = eval(x.kids[i], vars);
      return apply_intrinsic(x.name, std::span<const Value>(args, k));
    }
  }
  return {};
}

void Elemental::exec(const std::vector<Step>& steps, std::vector<Value>& vars) const {
  for (const auto& s : steps) {
    if (s.branch) {
      exec(eval(s.expr, vars).as_bool() ? s.then : s.otherwise, vars);
    } else {
      auto slot = static_cast<std::size_t>(s.slot);
      vars[slot] = convert(eval(s.expr, vars), slotTypes_[slot]);
    }
  }
}

void Elemental::run(std::span<const std::int64_t> index, std::span<const Value> in, std::span<const Value> scalars,
                    std::span<Value> out, Value* acc) const {
  thread_local std::vector<Value> vars;
  vars.assign(slotTypes_.size(), Value{});
  for (std::size_t i = 0; i < slotTypes_.size(); ++i) vars[i] = Value::zero(slotTypes_[i]);
  for (std::size_t i = 0; i < reads_.size(); ++i) vars[i] = in[i];
  for (std::size_t i = 0; i < writes_.size(); ++i) {
    if (priorOf_[i] >= 0) vars[static_cast<std::size_t>(outBase_) + i] = convert(in[static_cast<std::size_t>(priorOf_[i])], writeTypes_[i]);
  }
  for (std::size_t i = 0; i < scalarNames_.size(); ++i) vars[static_cast<std::size_t>(scalarBase_) + i] = scalars[i];
  for (std::size_t i = 0; i < loopVars_.size(); ++i) {
    vars[static_cast<std::size_t>(loopBase_) + i] = Value::integer(static_cast<std::int32_t>(index[i]));
  }
  if (accSlot_ >= 0 && acc) vars[static_cast<std::size_t>(accSlot_)] = *acc;
  exec(body_, vars);
  for (std::size_t i = 0; i < writes_.size(); ++i) out[i] = vars[static_cast<std::size_t>(outBase_) + i];
  if (accSlot_ >= 0 && acc) *acc = vars[static_cast<std::size_t>(accSlot_)];
}

}  // namespace sf
