#include <sstream>

#include "streamfort/frontend.hpp"

namespace sf {

namespace {

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntConst: return e.ival < 0 ? 5 : 9;
    case ExprKind::RealConst: return (!e.text.empty() && e.text[0] == '-') ? 5 : 9;
    case ExprKind::Unary: return e.uop == UnOp::Not ? 3 : 5;
    case ExprKind::Binary:
      switch (e.bop) {
        case BinOp::Or: return 1;
        case BinOp::And: return 2;
        case BinOp::Add:
        case BinOp::Sub: return 5;
        case BinOp::Mul:
        case BinOp::Div: return 6;
        default: return 4;
      }
    default: return 9;
  }
}

const char* op_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Lt: return " .lt. ";
    case BinOp::Le: return " .le. ";
    case BinOp::Gt: return " .gt. ";
    case BinOp::Ge: return " .ge. ";
    case BinOp::Eq: return " .eq. ";
    case BinOp::Ne: return " .ne. ";
    case BinOp::And: return " .and. ";
    case BinOp::Or: return " .or. ";
  }
  return "?";
}

void print(std::ostream& os, const ExprPtr& e);

void operand(std::ostream& os, const ExprPtr& e, bool paren) {
  if (paren) os << "(";
  print(os, e);
  if (paren) os << ")";
}

void print_list(std::ostream& os, const std::vector<ExprPtr>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    print(os, xs[i]);
  }
}

void print(std::ostream& os, const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::IntConst: os << e->ival; return;
    case ExprKind::RealConst: os << e->text; return;
    case ExprKind::LogicalConst: os << (e->bval ? ".true." : ".false."); return;
    case ExprKind::Var: os << e->name; return;
    case ExprKind::ArrayRef:
    case ExprKind::Call:
      os << e->name << "(";
      print_list(os, e->args);
      os << ")";
      return;
    case ExprKind::Unary: {
      const Expr& x = *e->args[0];
      if (e->uop == UnOp::Not) {
        os << ".not. ";
        operand(os, e->args[0], precedence(x) < 3);
      } else {
        os << (e->uop == UnOp::Neg ? "-" : "+");
        operand(os, e->args[0], precedence(x) < 6);
      }
      return;
    }
    case ExprKind::Binary: {
      int p = precedence(*e);
      const Expr& l = *e->args[0];
      const Expr& r = *e->args[1];
      bool lp = precedence(l) < p;
      bool rp = precedence(r) <= p;
      if (p == 4) lp = precedence(l) <= 4;
      operand(os, e->args[0], lp);
      os << op_text(e->bop);
      operand(os, e->args[1], rp);
      return;
    }
  }
}

std::string dims_text(const std::vector<Dim>& dims) {
  if (dims.empty()) return "";
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ",";
    if (dims[i].lo) os << print_expr(dims[i].lo) << ":";
    os << print_expr(dims[i].hi);
  }
  os << ")";
  return os.str();
}

const char* type_name(BaseType t) {
  switch (t) {
    case BaseType::Real: return "real";
    case BaseType::Integer: return "integer";
    case BaseType::Logical: return "logical";
  }
  return "real";
}

class Printer {
 public:
  explicit Printer(SourceForm form) : form_(form) {}

  void stmts(const std::vector<Stmt>& ss, int indent) {
    for (const auto& s : ss) stmt(s, indent);
  }

  void line(int label, int indent, const std::string& text) {
    std::string body = std::string(static_cast<std::size_t>(indent) * 2, ' ') + text;
    if (form_ == SourceForm::Fixed) {
      fixed_line(label, body);
    } else {
      free_line(label, body);
    }
  }

  std::string str() const { return os_.str(); }

 private:
  void fixed_line(int label, const std::string& body) {
    std::string lab = label ? std::to_string(label) : "";
    std::string head = std::string(5 - std::min<std::size_t>(5, lab.size()), ' ') + lab + " ";
    std::string rest = body;
    bool first = true;
    while (true) {
      std::string prefix = first ? head : "     &";
      std::size_t room = 72 - prefix.size();
      if (rest.size() <= room) {
        os_ << prefix << rest << "\n";
        return;
      }
      std::size_t cut = break_point(rest, room);
      os_ << prefix << rest.substr(0, cut) << "\n";
      rest = rest.substr(cut);
      first = false;
    }
  }

  void free_line(int label, const std::string& body) {
    std::string text = label ? std::to_string(label) + " " + body : body;
    constexpr std::size_t kWidth = 100;
    while (text.size() > kWidth) {
      std::size_t cut = break_point(text, kWidth - 2);
      if (cut == kWidth - 2 && text[cut - 1] != ',' && text[cut - 1] != ' ') break;
      os_ << text.substr(0, cut) << " &\n";
      text = "    & " + text.substr(cut);
    }
    os_ << text << "\n";
  }

  static std::size_t break_point(const std::string& s, std::size_t room) {
    for (std::size_t i = room; i > room / 2; --i) {
      char c = s[i - 1];
      if (c == ',' || c == ' ') return i;
    }
    return room;
  }

  static std::string do_header(const Stmt& s) {
    std::ostringstream os;
    os << "do ";
    if (s.doLabel) os << s.doLabel << " ";
    os << s.var << " = " << print_expr(s.lo) << ", " << print_expr(s.hi);
    if (s.step) os << ", " << print_expr(s.step);
    return os.str();
  }

  std::string simple(const Stmt& s) const {
    switch (s.kind) {
      case StmtKind::Assign: return print_expr(s.lhs) + " = " + print_expr(s.rhs);
      case StmtKind::Call: {
        std::ostringstream os;
        os << "call " << s.callee;
        if (!s.args.empty()) {
          os << "(";
          print_list(os, s.args);
          os << ")";
        }
        return os.str();
      }
      case StmtKind::Return: return "return";
      case StmtKind::Continue: return "continue";
      default: return "";
    }
  }

  void stmt(const Stmt& s, int indent) {
    switch (s.kind) {
      case StmtKind::Do:
        line(s.label, indent, do_header(s));
        stmts(s.body, indent + 1);
        if (!s.doLabel) line(0, indent, "end do");
        return;
      case StmtKind::If:
        if (s.logicalIf) {
          line(s.label, indent, "if (" + print_expr(s.cond) + ") " + simple(s.thenBody.at(0)));
          return;
        }
        if_block(s, indent, false);
        return;
      default:
        line(s.label, indent, simple(s));
    }
  }

  void if_block(const Stmt& s, int indent, bool as_else_if) {
    std::string head = (as_else_if ? "else if (" : "if (") + print_expr(s.cond) + ") then";
    line(as_else_if ? 0 : s.label, indent, head);
    stmts(s.thenBody, indent + 1);
    if (s.elseBody.size() == 1 && s.elseBody[0].elseIf) {
      if_block(s.elseBody[0], indent, true);
      return;
    }
    if (!s.elseBody.empty()) {
      line(0, indent, "else");
      stmts(s.elseBody, indent + 1);
    }
    line(0, indent, "end if");
  }

  SourceForm form_;
  std::ostringstream os_;
};

std::string header(const SourceUnit& u) {
  std::ostringstream os;
  switch (u.kind) {
    case UnitKind::Program: os << "program " << u.name; break;
    case UnitKind::Subroutine: os << "subroutine " << u.name; break;
    case UnitKind::Function: {
      const Decl* d = u.find_decl(u.name);
      if (d && d->type) os << type_name(*d->type) << " ";
      os << "function " << u.name;
      break;
    }
  }
  if (u.kind != UnitKind::Program && (!u.args.empty() || u.kind == UnitKind::Function)) {
    os << "(";
    for (std::size_t i = 0; i < u.args.size(); ++i) os << (i ? ", " : "") << u.args[i];
    os << ")";
  }
  return os.str();
}

bool is_result_only(const SourceUnit& u, const Decl& d) {
  return u.kind == UnitKind::Function && d.name == u.name && d.dims.empty() && !d.paramValue && !d.intent;
}

// Parameters first so later bounds can refer to them; then dummies in
// argument order; then everything else in declaration order.
std::vector<const Decl*> ordered_decls(const SourceUnit& u) {
  std::vector<const Decl*> out;
  for (const auto& d : u.decls) {
    if (d.paramValue) out.push_back(&d);
  }
  for (const auto& a : u.args) {
    const Decl* d = u.find_decl(a);
    if (d && !d->paramValue) out.push_back(d);
  }
  for (const auto& d : u.decls) {
    if (!d.paramValue && !u.is_arg(d.name)) out.push_back(&d);
  }
  return out;
}

void fixed_decls(Printer& p, const SourceUnit& u) {
  auto decls = ordered_decls(u);
  for (const Decl* d : decls) {
    if (!d->paramValue) continue;
    if (d->type) p.line(0, 0, std::string(type_name(*d->type)) + " " + d->name);
    p.line(0, 0, "parameter (" + d->name + " = " + print_expr(d->paramValue) + ")");
  }
  for (const Decl* d : decls) {
    if (d->paramValue || is_result_only(u, *d)) continue;
    if (d->type) {
      p.line(0, 0, std::string(type_name(*d->type)) + " " + d->name + dims_text(d->dims));
    } else if (!d->dims.empty()) {
      p.line(0, 0, "dimension " + d->name + dims_text(d->dims));
    }
  }
  for (const auto& cb : u.commonBlocks) {
    std::string text = "common /" + cb.name + "/ ";
    for (std::size_t i = 0; i < cb.vars.size(); ++i) text += (i ? ", " : "") + cb.vars[i];
    p.line(0, 0, text);
  }
}

void free_decls(Printer& p, const SourceUnit& u, int indent) {
  for (const Decl* d : ordered_decls(u)) {
    if (is_result_only(u, *d)) continue;
    if (!d->type) {
      if (!d->dims.empty()) p.line(0, indent, "dimension " + d->name + dims_text(d->dims));
      continue;
    }
    std::string text = type_name(*d->type);
    if (d->paramValue) text += ", parameter";
    if (d->intent) text += std::string(", intent(") + to_string(*d->intent) + ")";
    text += " :: " + d->name + dims_text(d->dims);
    if (d->paramValue) text += " = " + print_expr(d->paramValue);
    p.line(0, indent, text);
  }
  for (const auto& cb : u.commonBlocks) {
    std::string text = "common /" + cb.name + "/ ";
    for (std::size_t i = 0; i < cb.vars.size(); ++i) text += (i ? ", " : "") + cb.vars[i];
    p.line(0, indent, text);
  }
}

std::string end_text(const SourceUnit& u) {
  return std::string("end ") + to_string(u.kind) + " " + u.name;
}

}  // namespace

std::string print_expr(const ExprPtr& e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

std::string print_stmts(const std::vector<Stmt>& stmts, SourceForm form, int indent) {
  Printer p(form);
  p.stmts(stmts, indent);
  return p.str();
}

std::string print_fixed_form(const SourceUnit& unit) {
  Printer p(SourceForm::Fixed);
  p.line(0, 0, header(unit));
  if (unit.implicitNone) p.line(0, 0, "implicit none");
  fixed_decls(p, unit);
  p.stmts(unit.body, 0);
  p.line(0, 0, "end");
  return p.str();
}

std::string print_fixed_form(const std::vector<SourceUnit>& units) {
  std::string out;
  for (const auto& u : units) out += print_fixed_form(u);
  return out;
}

std::string print_free_form(const SourceUnit& unit) {
  Printer p(SourceForm::Free);
  int in = 0;
  if (!unit.moduleName.empty()) {
    p.line(0, 0, "module " + unit.moduleName);
    p.line(0, 0, "contains");
    in = 1;
  }
  p.line(0, in, header(unit));
  for (const auto& use : unit.uses) {
    std::string text = "use " + use.module;
    if (!use.only.empty()) {
      text += ", only: ";
      for (std::size_t i = 0; i < use.only.size(); ++i) text += (i ? ", " : "") + use.only[i];
    }
    p.line(0, in + 1, text);
  }
  if (unit.implicitNone) p.line(0, in + 1, "implicit none");
  free_decls(p, unit, in + 1);
  p.stmts(unit.body, in + 1);
  p.line(0, in, end_text(unit));
  if (!unit.moduleName.empty()) p.line(0, 0, "end module " + unit.moduleName);
  return p.str();
}

}  // namespace sf
