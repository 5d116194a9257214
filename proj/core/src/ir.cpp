#include <algorithm>
#include <set>

#include <json.hpp>

#include "streamfort/analyzer.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/interp.hpp"
#include "streamfort/refactor.hpp"

namespace sf {

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Map: return "map";
    case NodeKind::Fold: return "fold";
    case NodeKind::Seq: return "seq";
  }
  return "?";
}

bool IrNode::stenciled() const {
  for (const auto& a : inputs) {
    for (const auto& o : a.offsets) {
      if (std::any_of(o.begin(), o.end(), [](int x) { return x != 0; })) return true;
    }
  }
  return false;
}

const std::vector<Stmt>& IrNode::elemental() const {
  const std::vector<Stmt>* b = &code;
  while (b->size() == 1 && (*b)[0].kind == StmtKind::Do) b = &(*b)[0].body;
  return *b;
}

const AccessPattern* IrNode::input(const std::string& array) const {
  for (const auto& a : inputs) {
    if (a.array == array) return &a;
  }
  return nullptr;
}

const AccessPattern* IrNode::output(const std::string& array) const {
  for (const auto& a : outputs) {
    if (a.array == array) return &a;
  }
  return nullptr;
}

int FunctionalIR::find(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Shape FunctionalIR::shape_of(const std::string& array) const {
  const Decl* d = hostScope.find_decl(array);
  if (!d || d->dims.empty()) throw Error("'" + array + "' is not an array of the program");
  ParamValues pv = parameter_values(hostScope);
  Shape s;
  for (const auto& dim : d->dims) {
    auto lo = dim.lo ? const_eval(dim.lo, pv) : Value::integer(1);
    auto hi = const_eval(dim.hi, pv);
    if (!lo || !hi) throw UnsupportedFeature(hostScope.path, d->loc.line, "adjustable array bounds");
    s.lo.push_back(lo->as_int());
    s.hi.push_back(hi->as_int());
  }
  return s;
}

BaseType FunctionalIR::type_of(const std::string& array) const { return sf::type_of(hostScope, array); }

std::vector<std::string> FunctionalIR::arrays() const {
  std::vector<std::string> out;
  for (const auto& d : hostScope.decls) {
    if (!d.dims.empty() && !d.paramValue) out.push_back(d.name);
  }
  return out;
}

namespace {

using Renames = std::map<std::string, std::string>;
using json = nlohmann::ordered_json;

ExprPtr literal(Value v) {
  switch (v.type) {
    case BaseType::Integer: return make_int(v.as_int());
    case BaseType::Logical: return make_logical(v.as_bool());
    case BaseType::Real: {
      float f = v.as_real();
      if (std::signbit(f)) return make_unary(UnOp::Neg, make_real(real_literal(-f)));
      return make_real(real_literal(f));
    }
  }
  return nullptr;
}

/// Declaration with literal bounds and PARAMETER value, valid in any scope.
Decl literal_decl(const SourceUnit& unit, const ParamValues& pv, const std::string& from, const std::string& to) {
  Decl out;
  out.name = to;
  out.type = type_of(unit, from);
  if (const Decl* d = unit.find_decl(from)) {
    out.loc = d->loc;
    if (d->paramValue) out.paramValue = literal(pv.at(from));
    for (const auto& dim : d->dims) {
      auto lo = dim.lo ? const_eval(dim.lo, pv) : Value::integer(1);
      auto hi = const_eval(dim.hi, pv);
      if (!lo || !hi) throw UnsupportedFeature(unit.path, d->loc.line, "adjustable array bounds");
      out.dims.push_back(Dim{make_int(lo->as_int()), make_int(hi->as_int())});
    }
  }
  return out;
}

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

struct Item {
  bool nest = false;
  Stmt stmt;
  std::string origin;
};

class IrBuilder {
 public:
  explicit IrBuilder(const ProgramAst& ast) {
    ir_.program = std::make_shared<const ProgramAst>(refactor_all(ast));
    ir_.hostScope = ir_.program->program();
  }

  FunctionalIR build() {
    const SourceUnit& prog = ir_.program->program();
    ParamValues pv = parameter_values(prog);
    std::size_t t = prog.body.size();
    for (std::size_t i = 0; i < prog.body.size() && t == prog.body.size(); ++i) {
      if (is_time_loop(prog.body[i], pv)) t = i;
    }
    std::vector<Stmt> step;
    if (t < prog.body.size()) {
      const Stmt& loop = prog.body[t];
      ir_.hasTimeLoop = true;
      ir_.timeVar = loop.var;
      ir_.timeLo = const_eval(loop.lo, pv)->as_int();
      std::int64_t hi = const_eval(loop.hi, pv)->as_int();
      ir_.timeStride = loop.step ? const_eval(loop.step, pv)->as_int() : 1;
      ir_.timeSteps = std::max<std::int64_t>(0, (hi - ir_.timeLo + ir_.timeStride) / ir_.timeStride);
      ir_.prologue.assign(prog.body.begin(), prog.body.begin() + static_cast<std::ptrdiff_t>(t));
      ir_.epilogue.assign(prog.body.begin() + static_cast<std::ptrdiff_t>(t) + 1, prog.body.end());
      step = loop.body;
    } else {
      step = prog.body;
    }
    flatten(prog, step, {}, prog.name, 0);
    hostParams_ = parameter_values(ir_.hostScope);
    make_nodes();
    rebuild_edges(ir_);
    return std::move(ir_);
  }

 private:
  static bool is_time_loop(const Stmt& s, const ParamValues& pv) {
    if (s.kind != StmtKind::Do) return false;
    if (!const_eval(s.lo, pv) || !const_eval(s.hi, pv) || (s.step && !const_eval(s.step, pv))) return false;
    bool indexed = false;
    bool work = false;
    for_each_expr_in(s.body, [&](const Expr& e) {
      if (e.kind != ExprKind::ArrayRef) return;
      for (const auto& a : e.args) {
        for_each_expr(a, [&](const Expr& x) { indexed = indexed || (x.kind == ExprKind::Var && x.name == s.var); });
      }
    });
    for_each_stmt(s.body, [&](const Stmt& x) { work = work || x.kind == StmtKind::Call || x.kind == StmtKind::Do; });
    return work && !indexed;
  }

  void host(const std::string& name, Decl d) {
    if (!ir_.hostScope.find_decl(name)) ir_.hostScope.decls.push_back(std::move(d));
  }

  static std::vector<Stmt> renamed(const Stmt& s, const Renames& rn) { return rename_vars({s}, rn); }

  void flatten(const SourceUnit& unit, const std::vector<Stmt>& stmts, const Renames& rn, const std::string& origin,
               int depth) {
    for (const auto& s : stmts) {
      if (s.kind == StmtKind::Do) {
        items_.push_back({true, renamed(s, rn)[0], origin});
      } else if (s.kind == StmtKind::Call) {
        Stmt call = renamed(s, rn)[0];
        if (!inline_call(call, depth)) items_.push_back({false, call, origin});
      } else {
        items_.push_back({false, renamed(s, rn)[0], origin});
      }
    }
    (void)unit;
  }

  bool inline_call(const Stmt& call, int depth) {
    const SourceUnit* callee = ir_.program->find_unit(call.callee);
    if (!callee || callee->kind != UnitKind::Subroutine || depth > 32) return false;
    std::vector<Stmt> body = callee->body;
    if (!body.empty() && body.back().kind == StmtKind::Return) body.pop_back();
    bool early_return = false;
    for_each_stmt(body, [&](const Stmt& x) { early_return = early_return || x.kind == StmtKind::Return; });
    if (early_return) return false;

    ParamValues cpv = parameter_values(*callee);
    const std::string prefix = callee->name + "_";
    Renames rn;
    std::vector<Item> temps;
    for (std::size_t i = 0; i < callee->args.size(); ++i) {
      const std::string& dummy = callee->args[i];
      const ExprPtr& actual = call.args[i];
      BaseType want = type_of(*callee, dummy);
      if (actual->kind == ExprKind::Var) {
        BaseType got = type_of(ir_.hostScope, actual->name);
        bool rank_ok = callee->is_array(dummy) == ir_.hostScope.is_array(actual->name);
        if (got != want || !rank_ok) {
          throw IrTypeMismatch("argument '" + dummy + "' of '" + callee->name + "' is " + to_string(want) +
                               (callee->is_array(dummy) ? " array" : " scalar") + " but '" + actual->name + "' is " +
                               to_string(got) + (ir_.hostScope.is_array(actual->name) ? " array" : " scalar"));
        }
        rn[dummy] = actual->name;
        continue;
      }
      const Decl* d = callee->find_decl(dummy);
      if (callee->is_array(dummy) || !d || d->intent != Intent::In) return false;
      std::string tmp = prefix + dummy;
      host(tmp, literal_decl(*callee, cpv, dummy, tmp));
      Stmt assign;
      assign.kind = StmtKind::Assign;
      assign.lhs = make_var(tmp);
      assign.rhs = actual;
      assign.loc = call.loc;
      temps.push_back({false, assign, callee->name});
      rn[dummy] = tmp;
    }
    for (const auto& d : callee->decls) {
      if (callee->is_arg(d.name)) continue;
      rn[d.name] = prefix + d.name;
      host(prefix + d.name, literal_decl(*callee, cpv, d.name, prefix + d.name));
      hostedFrom_[prefix + d.name] = d.name;
    }
    for (auto& t : temps) items_.push_back(std::move(t));
    flatten(*callee, body, rn, callee->name, depth + 1);
    return true;
  }

  void make_nodes() {
    std::vector<IrNode> nodes;
    IrNode* seq = nullptr;
    auto add_seq = [&](const Item& it, const std::string& why) {
      if (!seq) {
        nodes.push_back(IrNode{});
        seq = &nodes.back();
        seq->kind = NodeKind::Seq;
        seq->name = it.origin;
        seq->scope = ir_.hostScope;
      }
      seq->code.push_back(it.stmt);
      if (!why.empty() && seq->reason.empty()) seq->reason = why;
    };
    for (const auto& it : items_) {
      if (!it.nest) {
        add_seq(it, "");
        continue;
      }
      NestAnalysis na = classify_loop_nest(ir_.hostScope, it.stmt);
      if (na.cls.kind == LoopKind::Sequential) {
        add_seq(it, na.cls.reason);
        continue;
      }
      auto node = nest_node(it, na);
      if (!node) {
        add_seq(it, "non-unit loop step");
        continue;
      }
      seq = nullptr;
      nodes.push_back(std::move(*node));
    }
    for (auto& n : nodes) {
      if (n.kind == NodeKind::Seq) {
        if (n.reason.empty()) n.reason = "host statements";
        seq_accesses(n);
      }
    }
    std::map<std::string, int> total;
    std::map<std::string, int> seen;
    for (const auto& n : nodes) ++total[n.name];
    for (auto& n : nodes) {
      if (total[n.name] > 1) n.name += "_" + std::to_string(++seen[n.name]);
    }
    ir_.nodes = std::move(nodes);
  }

  std::optional<IrNode> nest_node(const Item& it, const NestAnalysis& na) {
    IrNode n;
    n.kind = na.cls.kind == LoopKind::Map ? NodeKind::Map : NodeKind::Fold;
    n.name = it.origin;
    const Stmt* l = &it.stmt;
    for (std::size_t d = 0; d < na.loopVars.size(); ++d) {
      if (l->step && const_eval(l->step, hostParams_)->as_int() != 1) return std::nullopt;
      n.domain.lo.push_back(const_eval(l->lo, hostParams_)->as_int());
      n.domain.hi.push_back(const_eval(l->hi, hostParams_)->as_int());
      if (d + 1 < na.loopVars.size()) l = &l->body[0];
    }

    std::set<std::string> used = names_in({it.stmt});
    std::set<std::string> local(na.loopVars.begin(), na.loopVars.end());
    local.insert(na.privates.begin(), na.privates.end());
    for (const auto& u : used) {
      if (hostParams_.count(u)) local.insert(u);
    }
    Renames back;
    std::set<std::string> taken = used;
    for (const auto& c : local) {
      auto h = hostedFrom_.find(c);
      if (h == hostedFrom_.end() || taken.count(h->second)) continue;
      back[c] = h->second;
      taken.insert(h->second);
    }
    auto rn = [&](const std::string& s) {
      auto f = back.find(s);
      return f == back.end() ? s : f->second;
    };
    n.code = rename_vars({it.stmt}, back);
    for (const auto& v : na.loopVars) n.loopVars.push_back(rn(v));
    for (const auto& v : na.privates) n.privates.push_back(rn(v));
    for (const auto& v : na.scalarInputs) n.scalarInputs.push_back(rn(v));
    if (n.kind == NodeKind::Fold) {
      n.accumulator = rn(na.cls.accumulator);
      n.op = na.cls.op;
    }
    for (const auto& a : na.accesses) (a.write ? n.outputs : n.inputs).push_back(a);

    n.scope.kind = UnitKind::Subroutine;
    n.scope.name = n.name;
    n.scope.implicitNone = true;
    for (const auto& u : used) {
      n.scope.decls.push_back(literal_decl(ir_.hostScope, hostParams_, u, rn(u)));
    }
    return n;
  }

  void seq_accesses(IrNode& n) const {
    std::set<std::string> r;
    std::set<std::string> w;
    for_each_stmt(n.code, [&](const Stmt& s) {
      if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::ArrayRef) w.insert(s.lhs->name);
      if (s.kind == StmtKind::Call) {
        for (const auto& a : s.args) {
          if (a->kind == ExprKind::Var && ir_.hostScope.is_array(a->name)) w.insert(a->name);
        }
      }
    });
    for_each_expr_in(n.code, [&](const Expr& e) {
      if ((e.kind == ExprKind::ArrayRef || e.kind == ExprKind::Var) && ir_.hostScope.is_array(e.name)) r.insert(e.name);
    });
    for (const auto& a : r) n.inputs.push_back(AccessPattern{a, false, {}, true});
    for (const auto& a : w) n.outputs.push_back(AccessPattern{a, true, {}, true});
  }

  FunctionalIR ir_;
  std::vector<Item> items_;
  std::map<std::string, std::string> hostedFrom_;
  ParamValues hostParams_;
};

json offsets_json(const AccessPattern& a) {
  json o = json::array();
  for (const auto& off : a.offsets) o.push_back(off);
  return o;
}

}  // namespace

FunctionalIR build_ir(const ProgramAst& ast) { return IrBuilder(ast).build(); }

void rebuild_edges(FunctionalIR& ir) {
  ir.edges.clear();
  ir.carried.clear();
  const auto n = static_cast<int>(ir.nodes.size());
  for (int i = 0; i < n; ++i) {
    for (const auto& in : ir.nodes[static_cast<std::size_t>(i)].inputs) {
      int prod = -1;
      for (int j = i - 1; j >= 0 && prod < 0; --j) {
        if (ir.nodes[static_cast<std::size_t>(j)].output(in.array)) prod = j;
      }
      if (prod >= 0) {
        ir.edges.push_back({prod, i, in.array, ir.type_of(in.array)});
        continue;
      }
      if (!ir.hasTimeLoop) continue;
      for (int j = n - 1; j >= i && prod < 0; --j) {
        if (ir.nodes[static_cast<std::size_t>(j)].output(in.array)) prod = j;
      }
      if (prod >= 0) ir.carried.push_back({prod, i, in.array, ir.type_of(in.array)});
    }
  }
}

std::string FunctionalIR::to_json() const {
  json j;
  j["program"] = hostScope.name;
  if (hasTimeLoop) {
    j["timeLoop"] = {{"var", timeVar}, {"steps", timeSteps}};
  } else {
    j["timeLoop"] = nullptr;
  }
  json ns = json::array();
  for (const auto& n : nodes) {
    json x;
    x["name"] = n.name;
    x["kind"] = to_string(n.kind);
    if (n.kind != NodeKind::Seq) {
      x["loopVars"] = n.loopVars;
      x["domain"] = {{"lo", n.domain.lo}, {"hi", n.domain.hi}};
    }
    for (const auto* side : {&n.inputs, &n.outputs}) {
      json arr = json::array();
      for (const auto& a : *side) {
        json e;
        e["array"] = a.array;
        e["type"] = to_string(type_of(a.array));
        if (a.opaque) e["opaque"] = true;
        else e["offsets"] = offsets_json(a);
        arr.push_back(e);
      }
      x[side == &n.inputs ? "inputs" : "outputs"] = arr;
    }
    if (n.kind != NodeKind::Seq) {
      x["privates"] = n.privates;
      x["scalarInputs"] = n.scalarInputs;
    }
    if (n.kind == NodeKind::Fold) {
      x["accumulator"] = n.accumulator;
      x["op"] = to_string(n.op);
    }
    if (n.kind == NodeKind::Seq) x["reason"] = n.reason;
    ns.push_back(x);
  }
  j["nodes"] = ns;
  auto edges_json = [&](const std::vector<IrEdge>& es) {
    json arr = json::array();
    for (const auto& e : es) {
      arr.push_back({{"from", nodes[static_cast<std::size_t>(e.from)].name},
                     {"to", nodes[static_cast<std::size_t>(e.to)].name},
                     {"array", e.array},
                     {"type", to_string(e.type)}});
    }
    return arr;
  };
  j["edges"] = edges_json(edges);
  j["loopCarried"] = edges_json(carried);
  return j.dump(2) + "\n";
}

HostState ir_initial_state(const FunctionalIR& ir) {
  HostState s;
  exec_host(ir.hostScope, ir.prologue, s, ir.program.get());
  return s;
}

void run_node(const FunctionalIR& ir, const IrNode& node, HostState& state) {
  if (node.kind == NodeKind::Seq) {
    exec_host(ir.hostScope, node.code, state, ir.program.get());
    return;
  }
  std::set<std::string> keys(node.scalarInputs.begin(), node.scalarInputs.end());
  for (const auto& a : node.inputs) keys.insert(a.array);
  for (const auto& a : node.outputs) keys.insert(a.array);
  if (!node.accumulator.empty()) keys.insert(node.accumulator);
  HostState local;
  for (const auto& k : keys) {
    auto it = state.find(k);
    if (it != state.end()) local[k] = std::move(it->second);
  }
  exec_host(node.scope, node.code, local, ir.program.get());
  for (const auto& k : keys) {
    auto it = local.find(k);
    if (it != local.end()) state[k] = std::move(it->second);
  }
}

void run_ir_step(const FunctionalIR& ir, HostState& state) {
  for (const auto& n : ir.nodes) run_node(ir, n, state);
}

HostState run_ir(const FunctionalIR& ir, int steps) {
  HostState s = ir_initial_state(ir);
  std::int64_t n = steps < 0 ? ir.timeSteps : steps;
  for (std::int64_t t = 0; t < n; ++t) {
    if (ir.hasTimeLoop) s[ir.timeVar] = Field::scalar(Value::integer(static_cast<std::int32_t>(ir.timeLo + t * ir.timeStride)));
    run_ir_step(ir, s);
  }
  if (ir.hasTimeLoop) s[ir.timeVar] = Field::scalar(Value::integer(static_cast<std::int32_t>(ir.timeLo + n * ir.timeStride)));
  exec_host(ir.hostScope, ir.epilogue, s, ir.program.get());
  return s;
}

}  // namespace sf
