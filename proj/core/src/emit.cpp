#include <algorithm>
#include <functional>
#include <regex>
#include <sstream>

#include "streamfort/interp.hpp"
#include "streamfort/pipeline.hpp"

namespace sf {

namespace {

const char* c_type(BaseType t) {
  switch (t) {
    case BaseType::Real: return "float";
    case BaseType::Integer: return "int";
    case BaseType::Logical: return "bool";
  }
  return "float";
}

std::string c_literal(Value v) {
  switch (v.type) {
    case BaseType::Real: {
      std::string s = real_literal(v.as_real());
      for (auto& c : s) {
        if (c == 'd' || c == 'D' || c == 'E') c = 'e';
      }
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
      return s + "f";
    }
    case BaseType::Integer: return std::to_string(v.as_int());
    case BaseType::Logical: return v.as_bool() ? "true" : "false";
  }
  return "0";
}

const char* c_op(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

std::string c_intrinsic(const std::string& name, BaseType t) {
  bool real = t == BaseType::Real;
  if (name == "abs") return real ? "fabs" : "abs";
  if (name == "min") return real ? "fmin" : "min";
  if (name == "max") return real ? "fmax" : "max";
  if (name == "sqrt") return "sqrt";
  if (name == "mod") return real ? "fmod" : "mod";
  return name;
}

using RefName = std::function<std::string(const Expr&)>;

class CPrinter {
 public:
  CPrinter(const IrNode& node, RefName ref) : node_(node), params_(parameter_values(node.scope)), ref_(std::move(ref)) {}

  std::string expr(const ExprPtr& ep) const {
    const Expr& e = *ep;
    switch (e.kind) {
      case ExprKind::IntConst: return c_literal(Value::integer(e.ival));
      case ExprKind::RealConst: return c_literal(Value::real(e.rval));
      case ExprKind::LogicalConst: return e.bval ? "true" : "false";
      case ExprKind::Var: {
        auto p = params_.find(e.name);
        if (p != params_.end()) return c_literal(p->second);
        return e.name;
      }
      case ExprKind::ArrayRef: return ref_(e);
      case ExprKind::Call: {
        std::string s = c_intrinsic(e.name, type(e.args.empty() ? ep : e.args[0]));
        s += "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? ", " : "") + expr(e.args[i]);
        return s + ")";
      }
      case ExprKind::Unary:
        return std::string(e.uop == UnOp::Not ? "!" : e.uop == UnOp::Neg ? "-" : "+") + "(" + expr(e.args[0]) + ")";
      case ExprKind::Binary:
        return "(" + expr(e.args[0]) + " " + c_op(e.bop) + " " + expr(e.args[1]) + ")";
    }
    return "";
  }

  void stmts(std::ostringstream& os, const std::vector<Stmt>& body, int indent) const {
    std::string pad(static_cast<std::size_t>(indent), ' ');
    for (const auto& s : body) {
      if (s.kind == StmtKind::Assign) {
        std::string lhs = s.lhs->kind == ExprKind::ArrayRef ? ref_(*s.lhs) : s.lhs->name;
        os << pad << lhs << " = " << expr(s.rhs) << ";\n";
      } else if (s.kind == StmtKind::If) {
        os << pad << "if (" << expr(s.cond) << ") {\n";
        stmts(os, s.thenBody, indent + 2);
        if (!s.elseBody.empty()) {
          os << pad << "} else {\n";
          stmts(os, s.elseBody, indent + 2);
        }
        os << pad << "}\n";
      }
    }
  }

 private:
  BaseType type(const ExprPtr& e) const {
    switch (e->kind) {
      case ExprKind::IntConst: return BaseType::Integer;
      case ExprKind::RealConst: return BaseType::Real;
      case ExprKind::Var:
      case ExprKind::ArrayRef: {
        auto p = params_.find(e->name);
        if (p != params_.end()) return p->second.type;
        return type_of(node_.scope, e->name);
      }
      default: return e->args.empty() ? BaseType::Real : type(e->args[0]);
    }
  }

  const IrNode& node_;
  ParamValues params_;
  RefName ref_;
};

std::string tag(std::int64_t lin) {
  if (lin == 0) return "0";
  return (lin < 0 ? "m" : "p") + std::to_string(lin < 0 ? -lin : lin);
}

std::string plus(std::int64_t lin) {
  if (lin == 0) return "";
  return lin < 0 ? " - " + std::to_string(-lin) : " + " + std::to_string(lin);
}

std::string global_param(const PipelineGraph& g, const std::string& array, bool write) {
  const ArrayInfo* a = g.array(array);
  return std::string("__global ") + (write ? "" : "const ") + c_type(a ? a->type : BaseType::Real) + "* restrict " + array;
}

std::string signature(const std::string& name, const std::vector<std::string>& params) {
  std::string s = "__kernel void " + name + "(";
  if (params.empty()) s += "void";
  for (std::size_t i = 0; i < params.size(); ++i) s += (i ? ", " : "") + params[i];
  return s + ")\n";
}

std::vector<std::string> locals_of(const IrNode& node, const KernelNode& k) {
  std::vector<std::string> out;
  for_each_stmt(node.elemental(), [&](const Stmt& s) {
    if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::Var) {
      const std::string& n = s.lhs->name;
      if (std::find(out.begin(), out.end(), n) == out.end() && n != k.accumulator) out.push_back(n);
    }
  });
  return out;
}

/// Index variables recovered from the linear position `p`.
void unlinear(std::ostringstream& os, const Shape& s, const std::vector<std::string>& vars, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  std::int64_t stride = 1;
  std::vector<std::int64_t> strides(s.rank());
  for (std::size_t d = s.rank(); d-- > 0;) {
    strides[d] = stride;
    stride *= s.extent(d);
  }
  for (std::size_t d = 0; d < s.rank(); ++d) {
    os << pad << "const int " << vars[d] << " = p";
    if (strides[d] != 1) os << " / " << strides[d];
    if (d > 0) os << " % " << s.extent(d);
    os << plus(s.lo[d]) << ";\n";
  }
}

std::string inside(const Domain& dom, const std::vector<std::string>& vars) {
  std::string c;
  for (std::size_t d = 0; d < dom.lo.size(); ++d) {
    if (d) c += " && ";
    c += vars[d] + " >= " + std::to_string(dom.lo[d]) + " && " + vars[d] + " <= " + std::to_string(dom.hi[d]);
  }
  return c.empty() ? "true" : c;
}

std::string in_name(const KernelInput& in) { return "in_" + in.array + "_" + tag(in.linear); }

std::string emit_compute(const PipelineGraph& g, const KernelNode& k) {
  const IrNode& node = g.ir->nodes[static_cast<std::size_t>(k.irNode)];
  const Elemental& e = *k.elemental;
  const auto& vars = node.loopVars;
  const Shape& shape = g.array(k.inputs.empty() ? k.outputs.at(0).array : k.inputs[0].array)->shape;
  std::vector<std::string> params;
  std::set<std::string> mem_read;
  for (const auto& in : k.inputs) {
    if (in.source == InputSource::Memory) mem_read.insert(in.array);
  }
  std::set<std::string> mem_write;
  for (const auto& o : k.outputs) {
    if (o.toMemory) mem_write.insert(o.array);
  }
  for (const auto& a : g.arrays) {
    if (mem_read.count(a.name) || mem_write.count(a.name)) params.push_back(global_param(g, a.name, mem_write.count(a.name) > 0));
  }
  for (const auto& s : k.scalarArgs) params.push_back(std::string(c_type(type_of(node.scope, s))) + " " + s);
  if (!k.accumulator.empty()) {
    params.push_back(std::string(c_type(type_of(node.scope, k.accumulator))) + " " + k.accumulator + "_init");
    params.push_back(std::string("__global ") + c_type(type_of(node.scope, k.accumulator)) + "* restrict " +
                     k.accumulator + "_result");
  }
  bool streaming = g.variant != Variant::Baseline;
  std::set<std::string> outputs(e.writes().begin(), e.writes().end());

  auto linear_of = [&](const Expr& ref) {
    const Shape& s = g.array(ref.name)->shape;
    auto pv = parameter_values(node.scope);
    std::int64_t lin = 0;
    std::int64_t stride = 1;
    for (std::size_t d = ref.args.size(); d-- > 0;) {
      std::int64_t off = 0;
      const ExprPtr& a = ref.args[d];
      if (a->kind == ExprKind::Binary) {
        auto c = const_eval(a->args[0]->kind == ExprKind::Var && a->args[0]->name == vars[d] ? a->args[1] : a->args[0], pv);
        off = c ? c->as_int() : 0;
        if (a->bop == BinOp::Sub) off = -off;
      }
      lin += off * stride;
      stride *= s.extent(d);
    }
    return lin;
  };
  auto ref = [&](const Expr& r) -> std::string {
    std::int64_t lin = linear_of(r);
    if (outputs.count(r.name)) return streaming ? "out_" + r.name : r.name + "[p]";
    for (const auto& in : k.inputs) {
      if (in.array == r.name && in.linear == lin && !in.discard) {
        if (in.source == InputSource::Channel) return in_name(in);
        return r.name + "[p" + plus(lin) + "]";
      }
    }
    return r.name + "[p" + plus(lin) + "]";
  };
  CPrinter pr(node, ref);

  std::ostringstream os;
  os << "// " << k.name << " (" << to_string(g.variant) << ")\n";
  os << signature(k.name, params) << "{\n";
  if (!k.accumulator.empty()) os << "  " << c_type(type_of(node.scope, k.accumulator)) << " " << k.accumulator << " = " << k.accumulator << "_init;\n";
  auto locals = locals_of(node, k);
  auto declare_locals = [&](int indent) {
    std::string pad(static_cast<std::size_t>(indent), ' ');
    for (const auto& l : locals) {
      os << pad << c_type(type_of(node.scope, l)) << " " << l << " = " << c_literal(Value::zero(type_of(node.scope, l))) << ";\n";
    }
  };
  if (!streaming) {
    int indent = 2;
    for (std::size_t d = 0; d < vars.size(); ++d) {
      os << std::string(static_cast<std::size_t>(indent), ' ') << "for (int " << vars[d] << " = " << k.domain.lo[d] << "; "
         << vars[d] << " <= " << k.domain.hi[d] << "; " << vars[d] << "++) {\n";
      indent += 2;
    }
    std::string pad(static_cast<std::size_t>(indent), ' ');
    os << pad << "const int p = ";
    std::int64_t stride = 1;
    std::vector<std::string> terms;
    for (std::size_t d = shape.rank(); d-- > 0;) {
      std::string t = "(" + vars[d] + plus(-shape.lo[d]) + ")";
      if (stride != 1) t += " * " + std::to_string(stride);
      terms.insert(terms.begin(), t);
      stride *= shape.extent(d);
    }
    for (std::size_t i = 0; i < terms.size(); ++i) os << (i ? " + " : "") << terms[i];
    os << ";\n";
    declare_locals(indent);
    pr.stmts(os, node.elemental(), indent);
    for (std::size_t d = vars.size(); d-- > 0;) {
      indent -= 2;
      os << std::string(static_cast<std::size_t>(indent), ' ') << "}\n";
    }
  } else {
    os << "  for (int p = 0; p < " << shape.size() << "; p++) {\n";
    unlinear(os, shape, vars, 4);
    os << "    const bool inside = " << inside(k.domain, vars) << ";\n";
    for (const auto& in : k.inputs) {
      if (in.source != InputSource::Channel) continue;
      os << "    const " << c_type(g.array(in.array)->type) << " " << in_name(in) << " = read_channel(" << in.channel << ");\n";
    }
    for (std::size_t i = 0; i < e.writes().size(); ++i) {
      os << "    " << c_type(e.write_types()[i]) << " out_" << e.writes()[i] << " = "
         << c_literal(Value::zero(e.write_types()[i])) << ";\n";
    }
    os << "    if (inside) {\n";
    for (std::size_t i = 0; i < e.writes().size(); ++i) {
      for (std::size_t r = 0; r < e.reads().size(); ++r) {
        if (e.reads()[r].array != e.writes()[i]) continue;
        const KernelInput& in = k.inputs[r];
        os << "      out_" << e.writes()[i] << " = "
           << (in.source == InputSource::Channel ? in_name(in) : in.array + "[p" + plus(in.linear) + "]") << ";\n";
      }
    }
    declare_locals(6);
    pr.stmts(os, node.elemental(), 6);
    for (const auto& o : k.outputs) {
      if (o.toMemory) os << "      " << o.array << "[p] = out_" << o.array << ";\n";
    }
    os << "    }\n";
    for (const auto& o : k.outputs) {
      for (const auto& c : o.channels) os << "    write_channel(" << c << ", out_" << o.array << ");\n";
    }
    os << "  }\n";
  }
  if (!k.accumulator.empty()) os << "  " << k.accumulator << "_result[0] = " << k.accumulator << ";\n";
  os << "}\n";
  return os.str();
}

std::string emit_memory(const PipelineGraph& g, const KernelNode& k) {
  bool rd = k.kind == ProcessKind::MemRead;
  std::vector<std::string> params;
  for (const auto& st : k.streams) params.push_back(global_param(g, st.first, !rd));
  const Shape& shape = g.array(k.streams.at(0).first)->shape;
  std::vector<std::string> vars;
  for (std::size_t d = 0; d < shape.rank(); ++d) vars.push_back("i" + std::to_string(d));
  std::ostringstream os;
  os << "// " << k.name << " (" << to_string(g.variant) << ")\n";
  os << signature(k.name, params) << "{\n";
  os << "  for (int p = 0; p < " << shape.size() << "; p++) {\n";
  if (!rd) unlinear(os, shape, vars, 4);
  for (std::size_t i = 0; i < k.streams.size(); ++i) {
    const auto& [array, chans] = k.streams[i];
    const char* t = c_type(g.array(array)->type);
    if (rd) {
      os << "    const " << t << " v_" << array << " = " << array << "[p];\n";
      for (const auto& c : chans) os << "    write_channel(" << c << ", v_" << array << ");\n";
    } else {
      os << "    const " << t << " v_" << array << " = read_channel(" << chans.at(0) << ");\n";
      os << "    if (" << inside(k.streamDomains[i], vars) << ") " << array << "[p] = v_" << array << ";\n";
    }
  }
  os << "  }\n}\n";
  return os.str();
}

std::string emit_cache(const PipelineGraph& g, const SmartCacheSpec& s) {
  const char* t = c_type(g.array(s.array)->type);
  std::int64_t len = s.bufferLen + s.alignDelay;
  std::int64_t lead = s.mpOff + s.alignDelay;
  std::ostringstream os;
  os << "// " << s.streamId << " (" << to_string(g.variant) << ")" << (s.syncOnly ? " synchronization buffer" : "")
     << "\n";
  os << signature(s.streamId, {}) << "{\n";
  os << "  " << t << " window[" << len << "];\n";
  os << "  for (int q = 0; q < " << s.size + lead << "; q++) {\n";
  os << "    #pragma unroll\n";
  os << "    for (int i = 0; i < " << len - 1 << "; i++) window[i] = window[i + 1];\n";
  os << "    if (q < " << s.size << ") window[" << len - 1 << "] = read_channel(" << s.input << ");\n";
  os << "    const int p = q - " << lead << ";\n";
  os << "    if (p < 0) continue;\n";
  for (std::size_t i = 0; i < s.offsets.size(); ++i) {
    std::int64_t off = s.offsets[i];
    std::string at = "p" + plus(off);
    if (s.boundary == BoundaryPolicy::Clamp) {
      os << "    write_channel(" << s.outputs[i] << ", window[" << len - 1 - lead << " + min(max(" << at << ", 0), "
         << s.size - 1 << ") - p]);\n";
    } else {
      os << "    write_channel(" << s.outputs[i] << ", (" << at << " >= 0 && " << at << " < " << s.size << ") ? window["
         << len - 1 - lead << plus(off) << "] : 0);\n";
    }
  }
  os << "  }\n}\n";
  return os.str();
}

}  // namespace

std::map<std::string, std::string> emit_kernels(const PipelineGraph& g) {
  std::map<std::string, std::string> out;
  std::string suffix = std::string("_") + to_string(g.variant) + ".clk";
  for (const auto& k : g.kernels) {
    out[k.name + suffix] = k.kind == ProcessKind::Compute ? emit_compute(g, k) : emit_memory(g, k);
  }
  for (const auto& s : g.smartCaches) out[s.streamId + suffix] = emit_cache(g, s);
  return out;
}

KernelSignature parse_kernel_text(const std::string& text) {
  KernelSignature sig;
  static const std::regex head(R"(__kernel\s+void\s+(\w+)\s*\(([^)]*)\))");
  std::smatch m;
  if (!std::regex_search(text, m, head)) return sig;
  sig.name = m[1];
  std::string params = m[2];
  std::string body = m.suffix();
  std::stringstream ps(params);
  std::string p;
  static const std::regex last_ident(R"((\w+)\s*$)");
  while (std::getline(ps, p, ',')) {
    std::smatch pm;
    if (!std::regex_search(p, pm, last_ident) || pm[1] == "void") continue;
    sig.params.push_back(pm[1]);
    if (p.find("__global") != std::string::npos) sig.globalArrays.push_back(pm[1]);
  }
  static const std::regex rd(R"(read_channel\((\w+)\))");
  static const std::regex wr(R"(write_channel\((\w+)\s*,)");
  for (auto it = std::sregex_iterator(body.begin(), body.end(), rd); it != std::sregex_iterator(); ++it) {
    sig.channelReads.insert((*it)[1]);
  }
  for (auto it = std::sregex_iterator(body.begin(), body.end(), wr); it != std::sregex_iterator(); ++it) {
    sig.channelWrites.insert((*it)[1]);
  }
  for (const auto& a : sig.globalArrays) {
    std::regex use("\\b" + a + "\\s*\\[");
    sig.globalRefs += static_cast<int>(std::distance(std::sregex_iterator(body.begin(), body.end(), use), std::sregex_iterator()));
  }
  return sig;
}

}  // namespace sf
