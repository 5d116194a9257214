#include "streamfort/value.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "streamfort/errors.hpp"

namespace sf {

float Value::as_real() const {
  switch (type) {
    case BaseType::Real: return std::bit_cast<float>(bits);
    case BaseType::Integer: return static_cast<float>(std::bit_cast<std::int32_t>(bits));
    case BaseType::Logical: throw EvalError("logical value used as real");
  }
  return 0.0F;
}

std::int32_t Value::as_int() const {
  switch (type) {
    case BaseType::Integer: return std::bit_cast<std::int32_t>(bits);
    case BaseType::Real: return static_cast<std::int32_t>(std::bit_cast<float>(bits));
    case BaseType::Logical: throw EvalError("logical value used as integer");
  }
  return 0;
}

bool Value::as_bool() const {
  if (type != BaseType::Logical) throw EvalError("non-logical value used as condition");
  return bits != 0;
}

Value convert(Value v, BaseType to) {
  if (v.type == to) return v;
  switch (to) {
    case BaseType::Real: return Value::real(v.as_real());
    case BaseType::Integer: return Value::integer(v.as_int());
    case BaseType::Logical: throw EvalError("cannot convert numeric value to logical");
  }
  return v;
}

Value apply_unary(UnOp op, Value v) {
  switch (op) {
    case UnOp::Neg:
      if (v.type == BaseType::Integer) return Value::integer(-v.as_int());
      return Value::real(-v.as_real());
    case UnOp::Plus:
      return v;
    case UnOp::Not:
      return Value::logical(!v.as_bool());
  }
  return v;
}

namespace {

bool both_int(Value a, Value b) { return a.type == BaseType::Integer && b.type == BaseType::Integer; }

template <typename T>
bool compare(BinOp op, T x, T y) {
  switch (op) {
    case BinOp::Lt: return x < y;
    case BinOp::Le: return x <= y;
    case BinOp::Gt: return x > y;
    case BinOp::Ge: return x >= y;
    case BinOp::Eq: return x == y;
    case BinOp::Ne: return x != y;
    default: break;
  }
  return false;
}

}  // namespace

Value apply_binary(BinOp op, Value a, Value b) {
  switch (op) {
    case BinOp::And: return Value::logical(a.as_bool() && b.as_bool());
    case BinOp::Or: return Value::logical(a.as_bool() || b.as_bool());
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge:
    case BinOp::Eq:
    case BinOp::Ne:
      if (a.type == BaseType::Logical || b.type == BaseType::Logical) {
        if (op != BinOp::Eq && op != BinOp::Ne) throw EvalError("ordering comparison of logicals");
        return Value::logical(compare(op, a.as_bool(), b.as_bool()));
      }
      if (both_int(a, b)) return Value::logical(compare(op, a.as_int(), b.as_int()));
      return Value::logical(compare(op, a.as_real(), b.as_real()));
    default:
      break;
  }
  if (both_int(a, b)) {
    std::int32_t x = a.as_int();
    std::int32_t y = b.as_int();
    switch (op) {
      case BinOp::Add: return Value::integer(x + y);
      case BinOp::Sub: return Value::integer(x - y);
      case BinOp::Mul: return Value::integer(x * y);
      case BinOp::Div:
        if (y == 0) throw EvalError("integer division by zero");
        return Value::integer(x / y);
      default: break;
    }
  }
  float x = a.as_real();
  float y = b.as_real();
  switch (op) {
    case BinOp::Add: return Value::real(x + y);
    case BinOp::Sub: return Value::real(x - y);
    case BinOp::Mul: return Value::real(x * y);
    case BinOp::Div: return Value::real(x / y);
    default: break;
  }
  throw EvalError("bad binary operator");
}

Value apply_intrinsic(const std::string& name, std::span<const Value> args) {
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw EvalError(name + " expects " + std::to_string(n) + " arguments");
  };
  if (name == "abs") {
    need(1);
    if (args[0].type == BaseType::Integer) return Value::integer(std::abs(args[0].as_int()));
    return Value::real(std::fabs(args[0].as_real()));
  }
  if (name == "sqrt") {
    need(1);
    return Value::real(std::sqrt(args[0].as_real()));
  }
  if (name == "mod") {
    need(2);
    if (both_int(args[0], args[1])) {
      if (args[1].as_int() == 0) throw EvalError("mod by zero");
      return Value::integer(args[0].as_int() % args[1].as_int());
    }
    return Value::real(std::fmod(args[0].as_real(), args[1].as_real()));
  }
  if (name == "min" || name == "max") {
    if (args.size() < 2) throw EvalError(name + " expects at least 2 arguments");
    bool ints = std::all_of(args.begin(), args.end(), [](Value v) { return v.type == BaseType::Integer; });
    bool is_min = name == "min";
    if (ints) {
      std::int32_t r = args[0].as_int();
      for (std::size_t i = 1; i < args.size(); ++i) {
        std::int32_t x = args[i].as_int();
        r = is_min ? (x < r ? x : r) : (x > r ? x : r);
      }
      return Value::integer(r);
    }
    float r = args[0].as_real();
    for (std::size_t i = 1; i < args.size(); ++i) {
      float x = args[i].as_real();
      r = is_min ? (x < r ? x : r) : (x > r ? x : r);
    }
    return Value::real(r);
  }
  throw EvalError("unknown intrinsic '" + name + "'");
}

std::int64_t Shape::size() const {
  std::int64_t n = 1;
  for (std::size_t d = 0; d < rank(); ++d) n *= std::max<std::int64_t>(0, extent(d));
  return n;
}

std::int64_t Shape::row_stride() const {
  if (rank() <= 1) return 1;
  std::int64_t s = 1;
  for (std::size_t d = 1; d < rank(); ++d) s *= extent(d);
  return s;
}

std::int64_t Shape::linear(std::span<const std::int64_t> index) const {
  std::int64_t p = 0;
  for (std::size_t d = 0; d < rank(); ++d) p = p * extent(d) + (index[d] - lo[d]);
  return p;
}

bool Shape::contains(std::span<const std::int64_t> index) const {
  if (index.size() != rank()) return false;
  for (std::size_t d = 0; d < rank(); ++d) {
    if (index[d] < lo[d] || index[d] > hi[d]) return false;
  }
  return true;
}

std::vector<std::int64_t> Shape::unlinear(std::int64_t p) const {
  std::vector<std::int64_t> idx(rank());
  for (std::size_t d = rank(); d-- > 0;) {
    idx[d] = lo[d] + p % extent(d);
    p /= extent(d);
  }
  return idx;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t d = 0; d < rank(); ++d) {
    if (d) os << ",";
    os << lo[d] << ":" << hi[d];
  }
  os << ")";
  return os.str();
}

Field Field::scalar(Value v) { return Field{v.type, Shape{}, {v.bits}}; }

Field Field::array(BaseType type, Shape shape) {
  Field f{type, std::move(shape), {}};
  f.data.assign(static_cast<std::size_t>(f.shape.size()), 0U);
  return f;
}

std::optional<Value> const_eval(const ExprPtr& e, const ParamValues& params) {
  if (!e) return std::nullopt;
  switch (e->kind) {
    case ExprKind::IntConst: return Value::integer(e->ival);
    case ExprKind::RealConst: return Value::real(e->rval);
    case ExprKind::LogicalConst: return Value::logical(e->bval);
    case ExprKind::Var: {
      auto it = params.find(e->name);
      if (it == params.end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::Unary: {
      auto v = const_eval(e->args[0], params);
      if (!v) return std::nullopt;
      return apply_unary(e->uop, *v);
    }
    case ExprKind::Binary: {
      auto a = const_eval(e->args[0], params);
      auto b = const_eval(e->args[1], params);
      if (!a || !b) return std::nullopt;
      return apply_binary(e->bop, *a, *b);
    }
    case ExprKind::Call: {
      if (!is_intrinsic(e->name)) return std::nullopt;
      std::vector<Value> args;
      for (const auto& a : e->args) {
        auto v = const_eval(a, params);
        if (!v) return std::nullopt;
        args.push_back(*v);
      }
      return apply_intrinsic(e->name, args);
    }
    case ExprKind::ArrayRef: return std::nullopt;
  }
  return std::nullopt;
}

BaseType type_of(const SourceUnit& unit, const std::string& name) {
  const Decl* d = unit.find_decl(name);
  if (d && d->type) return *d->type;
  return implicit_type(name);
}

ParamValues parameter_values(const SourceUnit& unit, const std::map<std::string, double>& overrides) {
  ParamValues out;
  for (const auto& d : unit.decls) {
    if (!d.paramValue) continue;
    BaseType t = type_of(unit, d.name);
    auto ov = overrides.find(d.name);
    if (ov != overrides.end()) {
      if (t == BaseType::Integer) {
        out[d.name] = Value::integer(static_cast<std::int32_t>(ov->second));
      } else if (t == BaseType::Real) {
        out[d.name] = Value::real(static_cast<float>(ov->second));
      } else {
        out[d.name] = Value::logical(ov->second != 0.0);
      }
      continue;
    }
    auto v = const_eval(d.paramValue, out);
    if (!v) throw EvalError("PARAMETER '" + d.name + "' in '" + unit.name + "' is not a constant expression");
    out[d.name] = convert(*v, t);
  }
  return out;
}

std::int64_t ulp_distance(float a, float b) {
  auto key = [](float f) {
    auto i = std::bit_cast<std::int32_t>(f);
    return i < 0 ? static_cast<std::int64_t>(std::numeric_limits<std::int32_t>::min()) - i
                 : static_cast<std::int64_t>(i);
  };
  std::int64_t d = key(a) - key(b);
  return d < 0 ? -d : d;
}

}  // namespace sf
