#include "streamfort/interp.hpp"

#include <charconv>
#include <deque>
#include <memory>
#include <unordered_map>

#include "streamfort/errors.hpp"

namespace sf {

namespace {

struct Watch {
  std::string unit;
  std::string arg;
  const Field* field;
  std::vector<bool> written;
  ArgAccess acc;
};

struct Frame {
  const SourceUnit* unit = nullptr;
  ParamValues params;
  std::unordered_map<std::string, Field*> vars;
  std::deque<Field> owned;
  HostState* host = nullptr;
};

struct CommonStore {
  std::vector<std::unique_ptr<Field>> fields;
};

enum class Flow { Normal, Return };

class Interpreter {
 public:
  Interpreter(const ProgramAst* ast, IntentTrace* trace) : ast_(ast), trace_(trace) {}

  HostState run_main() {
    const SourceUnit& prog = ast_->program();
    Frame f = enter(prog, {});
    exec(f, prog.body);
    HostState out;
    for (const auto& d : prog.decls) {
      if (d.paramValue) continue;
      auto it = f.vars.find(d.name);
      if (it != f.vars.end()) out[d.name] = *it->second;
    }
    for (const auto& [name, field] : f.vars) {
      if (!out.count(name) && !f.params.count(name)) out[name] = *field;
    }
    return out;
  }

  void run_host(const SourceUnit& scope, const std::vector<Stmt>& stmts, HostState& state) {
    Frame f;
    f.unit = &scope;
    f.params = parameter_values(scope);
    f.host = &state;
    for (auto& [name, field] : state) f.vars[name] = &field;
    exec(f, stmts);
  }

 private:
  [[noreturn]] static void fail(const Frame& f, SourceLoc loc, const std::string& msg) {
    throw EvalError(f.unit->name + ":" + std::to_string(loc.line) + ": " + msg);
  }

  Shape shape_of(const Frame& f, const Decl& d) {
    Shape s;
    for (const auto& dim : d.dims) {
      std::int64_t lo = 1;
      if (dim.lo) {
        auto v = const_eval(dim.lo, f.params);
        if (!v) fail(f, d.loc, "non-constant bound for '" + d.name + "'");
        lo = v->as_int();
      }
      auto hi = const_eval(dim.hi, f.params);
      if (!hi) fail(f, d.loc, "non-constant bound for '" + d.name + "'");
      s.lo.push_back(lo);
      s.hi.push_back(hi->as_int());
    }
    return s;
  }

  Field fresh(const Frame& f, const std::string& name) {
    BaseType t = type_of(*f.unit, name);
    const Decl* d = f.unit->find_decl(name);
    if (d && !d->dims.empty()) return Field::array(t, shape_of(f, *d));
    return Field::scalar(Value::zero(t));
  }

  Field* lookup(Frame& f, const std::string& name) {
    auto it = f.vars.find(name);
    if (it != f.vars.end()) return it->second;
    Field* p;
    if (f.host) {
      auto [hit, inserted] = f.host->emplace(name, Field{});
      if (inserted) hit->second = fresh(f, name);
      p = &hit->second;
    } else {
      f.owned.push_back(fresh(f, name));
      p = &f.owned.back();
    }
    f.vars[name] = p;
    return p;
  }

  Frame enter(const SourceUnit& u, const std::vector<Field*>& actuals) {
    Frame f;
    f.unit = &u;
    f.params = parameter_values(u);
    for (std::size_t i = 0; i < u.args.size(); ++i) {
      Field* a = actuals[i];
      Field expect = fresh(f, u.args[i]);
      if (a->type != expect.type || a->shape != expect.shape) {
        fail(f, u.loc, "argument '" + u.args[i] + "' does not match the actual argument's type or shape");
      }
      f.vars[u.args[i]] = a;
    }
    for (const auto& cb : u.commonBlocks) {
      CommonStore& store = commons_[cb.name];
      for (std::size_t i = 0; i < cb.vars.size(); ++i) {
        Field want = fresh(f, cb.vars[i]);
        if (store.fields.size() <= i) store.fields.push_back(std::make_unique<Field>(want));
        Field* have = store.fields[i].get();
        if (have->type != want.type || have->shape != want.shape) {
          fail(f, cb.loc, "COMMON /" + cb.name + "/ entry '" + cb.vars[i] + "' disagrees with an earlier layout");
        }
        f.vars[cb.vars[i]] = have;
      }
    }
    return f;
  }

  // ---- tracing ----

  void note(const Field* field, std::int64_t p, bool write) {
    if (watches_.empty()) return;
    for (auto& w : watches_) {
      if (w->field != field) continue;
      if (write) {
        w->acc.written = true;
        w->written[static_cast<std::size_t>(p)] = true;
      } else {
        w->acc.read = true;
        if (!w->written[static_cast<std::size_t>(p)]) w->acc.readBeforeWrite = true;
      }
    }
  }

  // ---- expressions ----

  std::int64_t element(Frame& f, const Expr& e, Field*& field) {
    field = lookup(f, e.name);
    if (field->shape.rank() != e.args.size()) fail(f, e.loc, "rank mismatch on '" + e.name + "'");
    std::int64_t idx[8];
    if (e.args.size() > 8) fail(f, e.loc, "too many subscripts");
    for (std::size_t d = 0; d < e.args.size(); ++d) idx[d] = eval(f, e.args[d]).as_int();
    std::span<const std::int64_t> ix(idx, e.args.size());
    if (!field->shape.contains(ix)) fail(f, e.loc, "subscript out of bounds on '" + e.name + "'");
    return field->shape.linear(ix);
  }

  Value eval(Frame& f, const ExprPtr& ep) {
    const Expr& e = *ep;
    switch (e.kind) {
      case ExprKind::IntConst: return Value::integer(e.ival);
      case ExprKind::RealConst: return Value::real(e.rval);
      case ExprKind::LogicalConst: return Value::logical(e.bval);
      case ExprKind::Var: {
        auto pit = f.params.find(e.name);
        if (pit != f.params.end()) return pit->second;
        Field* field = lookup(f, e.name);
        if (!field->is_scalar()) fail(f, e.loc, "array '" + e.name + "' used as a scalar");
        note(field, 0, false);
        return field->value();
      }
      case ExprKind::ArrayRef: {
        Field* field;
        std::int64_t p = element(f, e, field);
        note(field, p, false);
        return field->at(p);
      }
      case ExprKind::Call: {
        if (is_intrinsic(e.name)) {
          std::vector<Value> args;
          args.reserve(e.args.size());
          for (const auto& a : e.args) args.push_back(eval(f, a));
          return apply_intrinsic(e.name, args);
        }
        return call(f, e.name, e.args, e.loc, true);
      }
      case ExprKind::Unary: return apply_unary(e.uop, eval(f, e.args[0]));
      case ExprKind::Binary: {
        Value a = eval(f, e.args[0]);
        Value b = eval(f, e.args[1]);
        return apply_binary(e.bop, a, b);
      }
    }
    fail(f, e.loc, "bad expression");
  }

  Value call(Frame& f, const std::string& name, const std::vector<ExprPtr>& args, SourceLoc loc, bool as_function) {
    if (!ast_) fail(f, loc, "call to '" + name + "' without a program context");
    const SourceUnit* callee = ast_->find_unit(name);
    if (!callee) fail(f, loc, "unresolved callee '" + name + "'");
    if (++depth_ > 256) fail(f, loc, "call depth exceeded");
    std::vector<Field*> actuals;
    std::deque<Field> temps;
    struct CopyBack {
      Field* temp;
      Field* target;
      std::int64_t p;
    };
    std::vector<CopyBack> copy_back;
    for (const auto& a : args) {
      if (a->kind == ExprKind::Var && !f.params.count(a->name)) {
        actuals.push_back(lookup(f, a->name));
      } else if (a->kind == ExprKind::ArrayRef) {
        Field* target;
        std::int64_t p = element(f, *a, target);
        note(target, p, false);
        temps.push_back(Field::scalar(target->at(p)));
        copy_back.push_back({&temps.back(), target, p});
        actuals.push_back(&temps.back());
      } else {
        temps.push_back(Field::scalar(eval(f, a)));
        actuals.push_back(&temps.back());
      }
    }
    Frame cf = enter(*callee, actuals);
    std::size_t watch_base = watches_.size();
    if (trace_) {
      for (std::size_t i = 0; i < callee->args.size(); ++i) {
        auto w = std::make_unique<Watch>();
        w->unit = callee->name;
        w->arg = callee->args[i];
        w->field = cf.vars[callee->args[i]];
        w->written.assign(static_cast<std::size_t>(w->field->shape.size()), false);
        watches_.push_back(std::move(w));
      }
    }
    exec(cf, callee->body);
    Value result;
    if (as_function) result = lookup(cf, callee->name)->value();
    if (trace_) {
      for (std::size_t i = watch_base; i < watches_.size(); ++i) {
        ArgAccess& t = (*trace_)[{watches_[i]->unit, watches_[i]->arg}];
        t.read = t.read || watches_[i]->acc.read;
        t.written = t.written || watches_[i]->acc.written;
        t.readBeforeWrite = t.readBeforeWrite || watches_[i]->acc.readBeforeWrite;
      }
      watches_.resize(watch_base);
    }
    for (const auto& cb : copy_back) {
      cb.target->set(cb.p, cb.temp->value());
      note(cb.target, cb.p, true);
    }
    --depth_;
    return result;
  }

  // ---- statements ----

  void assign(Frame& f, const Stmt& s) {
    Value v = eval(f, s.rhs);
    const Expr& l = *s.lhs;
    if (l.kind == ExprKind::ArrayRef) {
      Field* field;
      std::int64_t p = element(f, l, field);
      field->set(p, v);
      note(field, p, true);
      return;
    }
    if (f.params.count(l.name)) fail(f, s.loc, "assignment to PARAMETER '" + l.name + "'");
    Field* field = lookup(f, l.name);
    if (!field->is_scalar()) fail(f, s.loc, "assignment to whole array '" + l.name + "'");
    field->set(0, v);
    note(field, 0, true);
  }

  Flow exec(Frame& f, const std::vector<Stmt>& stmts) {
    for (const auto& s : stmts) {
      if (exec(f, s) == Flow::Return) return Flow::Return;
    }
    return Flow::Normal;
  }

  Flow exec(Frame& f, const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Assign:
        assign(f, s);
        return Flow::Normal;
      case StmtKind::Do: {
        std::int32_t lo = eval(f, s.lo).as_int();
        std::int32_t hi = eval(f, s.hi).as_int();
        std::int32_t step = s.step ? eval(f, s.step).as_int() : 1;
        if (step == 0) fail(f, s.loc, "zero DO step");
        std::int64_t trips = (static_cast<std::int64_t>(hi) - lo + step) / step;
        Field* var = lookup(f, s.var);
        std::int32_t x = lo;
        for (std::int64_t t = 0; t < trips; ++t) {
          var->set(0, Value::integer(x));
          note(var, 0, true);
          if (exec(f, s.body) == Flow::Return) return Flow::Return;
          x = var->value().as_int() + step;
        }
        var->set(0, Value::integer(x));
        note(var, 0, true);
        return Flow::Normal;
      }
      case StmtKind::If:
        if (eval(f, s.cond).as_bool()) return exec(f, s.thenBody);
        return exec(f, s.elseBody);
      case StmtKind::Call:
        call(f, s.callee, s.args, s.loc, false);
        return Flow::Normal;
      case StmtKind::Return:
        return Flow::Return;
      case StmtKind::Continue:
        return Flow::Normal;
    }
    return Flow::Normal;
  }

  const ProgramAst* ast_;
  IntentTrace* trace_;
  std::map<std::string, CommonStore> commons_;
  std::vector<std::unique_ptr<Watch>> watches_;
  int depth_ = 0;
};

}  // namespace

HostState run_program(const ProgramAst& ast, IntentTrace* trace) {
  Interpreter in(&ast, trace);
  return in.run_main();
}

void exec_host(const SourceUnit& scope, const std::vector<Stmt>& stmts, HostState& state, const ProgramAst* ast) {
  Interpreter in(ast, nullptr);
  in.run_host(scope, stmts, state);
}

std::string real_literal(float f) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, f);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  if (s.find('.') == std::string::npos) s.insert(s.find('e'), ".0");
  return s;
}

ProgramAst specialize_parameters(ProgramAst ast, const std::map<std::string, double>& overrides) {
  for (auto& u : ast.units) {
    for (auto& d : u.decls) {
      if (!d.paramValue) continue;
      auto it = overrides.find(d.name);
      if (it == overrides.end()) continue;
      switch (type_of(u, d.name)) {
        case BaseType::Integer: d.paramValue = make_int(static_cast<std::int32_t>(it->second)); break;
        case BaseType::Real: {
          float v = static_cast<float>(it->second);
          ExprPtr lit = make_real(real_literal(v < 0 ? -v : v));
          d.paramValue = v < 0 ? make_unary(UnOp::Neg, lit) : lit;
          break;
        }
        case BaseType::Logical: d.paramValue = make_logical(it->second != 0.0); break;
      }
    }
  }
  return ast;
}

}  // namespace sf
