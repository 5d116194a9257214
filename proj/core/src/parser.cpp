// Fixed-form and restricted free-form readers for the FORTRAN 77 subset.

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"

namespace sf {
namespace {

struct LogicalLine {
  int label = 0;
  std::string text;
  std::vector<SourceLoc> locs;  // one per character of text
};

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::vector<std::string_view> physical_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  for (auto& l : out) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return out;
}

// Append `body` (starting at 1-based column `col0`) to a logical line,
// stopping at an inline '!' comment.
void append_text(LogicalLine& ll, std::string_view body, int line, int col0) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '!') break;
    ll.text.push_back(c == '\t' ? ' ' : lower(c));
    ll.locs.push_back(SourceLoc{line, col0 + static_cast<int>(i)});
  }
}

int parse_label(std::string_view field, const std::string& path, int line) {
  int label = 0;
  bool any = false;
  for (std::size_t i = 0; i < field.size(); ++i) {
    char c = field[i];
    if (c == ' ') continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw SyntaxError(path, line, static_cast<int>(i) + 1, "invalid character in label field");
    }
    label = label * 10 + (c - '0');
    any = true;
  }
  return any ? label : 0;
}

std::vector<LogicalLine> split_fixed(std::string_view text, const std::string& path) {
  std::vector<LogicalLine> out;
  auto lines = physical_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view l = lines[n];
    int line = static_cast<int>(n) + 1;
    if (l.empty() || blank(l)) continue;
    char c0 = l[0];
    if (c0 == 'c' || c0 == 'C' || c0 == '*' || c0 == '!') continue;
    if (l.size() > 72) l = l.substr(0, 72);
    std::size_t tab = l.find('\t');
    if (tab != std::string_view::npos && tab < 6) {
      // Tab form: label before the tab, statement text after it.
      LogicalLine ll;
      ll.label = parse_label(l.substr(0, tab), path, line);
      append_text(ll, l.substr(tab + 1), line, static_cast<int>(tab) + 2);
      if (!blank(ll.text)) out.push_back(std::move(ll));
      continue;
    }
    std::string_view label_field = l.substr(0, std::min<std::size_t>(5, l.size()));
    char cont = l.size() > 5 ? l[5] : ' ';
    std::string_view body = l.size() > 6 ? l.substr(6) : std::string_view{};
    if (cont != ' ' && cont != '0') {
      if (out.empty()) throw SyntaxError(path, line, 6, "continuation line without an initial line");
      if (!blank(label_field)) throw SyntaxError(path, line, 1, "label on a continuation line");
      append_text(out.back(), body, line, 7);
      continue;
    }
    if (blank(body) && blank(label_field)) continue;
    LogicalLine ll;
    ll.label = parse_label(label_field, path, line);
    append_text(ll, body, line, 7);
    if (blank(ll.text)) {
      if (ll.label) throw SyntaxError(path, line, 1, "label on an empty statement");
      continue;
    }
    out.push_back(std::move(ll));
  }
  return out;
}

std::vector<LogicalLine> split_free(std::string_view text, const std::string& path) {
  std::vector<LogicalLine> out;
  auto lines = physical_lines(text);
  bool continuing = false;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view l = lines[n];
    int line = static_cast<int>(n) + 1;
    std::size_t bang = l.find('!');
    if (bang != std::string_view::npos) l = l.substr(0, bang);
    while (!l.empty() && (l.back() == ' ' || l.back() == '\t')) l.remove_suffix(1);
    std::size_t first = l.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    bool more = !l.empty() && l.back() == '&';
    if (more) l.remove_suffix(1);
    std::string_view body = l.substr(first);
    int col0 = static_cast<int>(first) + 1;
    if (continuing) {
      if (!body.empty() && body.front() == '&') {
        body.remove_prefix(1);
        ++col0;
      }
      out.back().text.push_back(' ');
      out.back().locs.push_back(SourceLoc{line, col0});
      append_text(out.back(), body, line, col0);
    } else {
      LogicalLine ll;
      std::size_t d = 0;
      while (d < body.size() && std::isdigit(static_cast<unsigned char>(body[d]))) ++d;
      if (d > 0 && d < body.size() && body[d] == ' ') {
        ll.label = parse_label(body.substr(0, d), path, line);
        body.remove_prefix(d);
        col0 += static_cast<int>(d);
      }
      append_text(ll, body, line, col0);
      out.push_back(std::move(ll));
    }
    continuing = more;
  }
  return out;
}

// ---- tokens ---------------------------------------------------------------

enum class Tok { Ident, Int, Real, DotOp, Op, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceLoc loc;
};

const std::set<std::string>& dot_ops() {
  static const std::set<std::string> ops = {"eq", "ne", "lt", "le", "gt", "ge", "and", "or", "not", "true", "false"};
  return ops;
}

std::vector<Token> tokenize(const LogicalLine& ll, const std::string& path) {
  std::vector<Token> toks;
  const std::string& s = ll.text;
  auto loc_at = [&](std::size_t i) { return i < ll.locs.size() ? ll.locs[i] : (ll.locs.empty() ? SourceLoc{} : ll.locs.back()); };
  std::size_t i = 0;
  auto dot_op_at = [&](std::size_t j) -> std::optional<std::string> {
    // s[j] == '.'; returns the operator word if a known dot operator follows.
    std::size_t k = j + 1;
    while (k < s.size() && std::isalpha(static_cast<unsigned char>(s[k]))) ++k;
    if (k < s.size() && s[k] == '.' && k > j + 1) {
      std::string w = s.substr(j + 1, k - j - 1);
      if (dot_ops().count(w)) return w;
    }
    return std::nullopt;
  };
  while (i < s.size()) {
    char c = s[i];
    SourceLoc loc = loc_at(i);
    if (c == ' ') {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      toks.push_back({Tok::Ident, s.substr(i, j - i), loc});
      i = j;
      continue;
    }
    bool leading_dot_number = c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (std::isdigit(static_cast<unsigned char>(c)) || leading_dot_number) {
      std::size_t j = i;
      bool real = false;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && s[j] == '.' && !dot_op_at(j)) {
        real = true;
        ++j;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'd')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          if (s[j] == 'd') throw UnsupportedFeature(path, loc.line, "DOUBLE PRECISION constant");
          real = true;
          while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
          j = k;
        }
      }
      toks.push_back({real ? Tok::Real : Tok::Int, s.substr(i, j - i), loc});
      i = j;
      continue;
    }
    if (c == '.') {
      auto w = dot_op_at(i);
      if (!w) throw SyntaxError(path, loc.line, loc.col, "unknown dot operator");
      toks.push_back({Tok::DotOp, *w, loc});
      i += w->size() + 2;
      continue;
    }
    if (c == '\'' || c == '"') throw UnsupportedFeature(path, loc.line, "character constant");
    auto two = s.substr(i, 2);
    if (two == "**") throw UnsupportedFeature(path, loc.line, "exponentiation operator");
    if (two == "::" || two == "==" || two == "/=" || two == "<=" || two == ">=") {
      toks.push_back({Tok::Op, two, loc});
      i += 2;
      continue;
    }
    static const std::string kSingle = "()+-*/=,:<>";
    if (kSingle.find(c) != std::string::npos) {
      toks.push_back({Tok::Op, std::string(1, c), loc});
      ++i;
      continue;
    }
    throw SyntaxError(path, loc.line, loc.col, std::string("unexpected character '") + c + "'");
  }
  SourceLoc end = ll.locs.empty() ? SourceLoc{} : ll.locs.back();
  end.col += 1;
  toks.push_back({Tok::End, "", end});
  return toks;
}

// ---- statements -------------------------------------------------------------

enum class PKind {
  ProgramStart,
  SubroutineStart,
  FunctionStart,
  End,  // END of a program unit (any form)
  TypeDecl,
  Dimension,
  Parameter,
  Common,
  ImplicitNone,
  Use,
  ModuleStart,
  Contains,
  EndModule,
  Exec,
  DoStart,
  EndDo,
  IfThen,
  ElseIf,
  Else,
  EndIf,
};

struct Entity {
  std::string name;
  std::vector<Dim> dims;
  ExprPtr init;
  SourceLoc loc;
};

struct Parsed {
  PKind kind = PKind::Exec;
  SourceLoc loc;
  std::string name;
  std::vector<std::string> names;
  std::optional<BaseType> type;
  std::vector<Entity> entities;
  std::optional<Intent> intent;
  bool parameterAttr = false;
  std::vector<std::pair<std::string, std::vector<Entity>>> blocks;  // COMMON
  ExprPtr cond;
  Stmt stmt;
};

const std::map<std::string, std::string>& unsupported_keywords() {
  static const std::map<std::string, std::string> m = {
      {"equivalence", "EQUIVALENCE"}, {"goto", "GOTO"},          {"go", "GOTO"},
      {"data", "DATA"},               {"save", "SAVE"},          {"external", "EXTERNAL"},
      {"intrinsic", "INTRINSIC"},     {"entry", "ENTRY"},        {"format", "FORMAT"},
      {"read", "READ"},               {"write", "WRITE"},        {"print", "PRINT"},
      {"open", "OPEN"},               {"close", "CLOSE"},        {"stop", "STOP"},
      {"pause", "PAUSE"},             {"include", "INCLUDE"},    {"block", "BLOCK DATA"},
      {"blockdata", "BLOCK DATA"},    {"assign", "ASSIGN"},      {"character", "CHARACTER"},
      {"complex", "COMPLEX"},         {"double", "DOUBLE PRECISION"},
      {"doubleprecision", "DOUBLE PRECISION"},
  };
  return m;
}

const std::set<std::string>& statement_keywords() {
  static const std::set<std::string> k = {"program", "subroutine", "function", "real",  "integer",
                                          "logical", "parameter",  "dimension", "common", "implicit",
                                          "do",      "enddo",      "end",       "endif",  "else",
                                          "elseif",  "if",         "call",      "return", "continue",
                                          "module",  "contains",   "use"};
  return k;
}

class StatementParser {
 public:
  StatementParser(std::vector<Token> toks, std::string path) : toks_(std::move(toks)), path_(std::move(path)) {}

  Parsed parse() {
    Parsed p;
    p.loc = peek().loc;
    if (peek().kind != Tok::Ident) fail("statement must begin with a keyword or a variable name");
    if (is_assignment()) {
      p.kind = PKind::Exec;
      p.stmt = parse_assignment();
      expect_end();
      return p;
    }
    std::string kw = peek().text;
    auto un = unsupported_keywords().find(kw);
    if (un != unsupported_keywords().end()) throw UnsupportedFeature(path_, p.loc.line, un->second);
    if (!statement_keywords().count(kw)) {
      if (toks_.size() > 2 && toks_[1].kind == Tok::Ident) {
        throw UnsupportedFeature(path_, p.loc.line, "spaces inside identifiers");
      }
      fail("unrecognized statement");
    }
    next();
    if (kw == "program") {
      p.kind = PKind::ProgramStart;
      p.name = ident();
    } else if (kw == "subroutine") {
      p.kind = PKind::SubroutineStart;
      p.name = ident();
      p.names = dummy_list();
    } else if (kw == "function") {
      p.kind = PKind::FunctionStart;
      p.name = ident();
      p.names = dummy_list();
    } else if (kw == "real" || kw == "integer" || kw == "logical") {
      BaseType t = kw == "real" ? BaseType::Real : (kw == "integer" ? BaseType::Integer : BaseType::Logical);
      if (peek().text == "*") throw UnsupportedFeature(path_, p.loc.line, "type size specifier");
      if (peek().kind == Tok::Ident && peek().text == "function") {
        next();
        p.kind = PKind::FunctionStart;
        p.type = t;
        p.name = ident();
        p.names = dummy_list();
      } else {
        p.kind = PKind::TypeDecl;
        p.type = t;
        parse_type_decl(p);
      }
    } else if (kw == "dimension") {
      p.kind = PKind::Dimension;
      p.entities = entity_list(false);
    } else if (kw == "parameter") {
      p.kind = PKind::Parameter;
      expect("(");
      do {
        Entity e;
        e.loc = peek().loc;
        e.name = ident();
        expect("=");
        e.init = expr();
        p.entities.push_back(std::move(e));
      } while (accept(","));
      expect(")");
    } else if (kw == "common") {
      p.kind = PKind::Common;
      parse_common(p);
    } else if (kw == "implicit") {
      if (peek().text != "none") throw UnsupportedFeature(path_, p.loc.line, "IMPLICIT typing rules");
      next();
      p.kind = PKind::ImplicitNone;
    } else if (kw == "use") {
      p.kind = PKind::Use;
      p.name = ident();
      if (accept(",")) {
        if (ident() != "only") fail("expected ONLY");
        expect(":");
        do {
          p.names.push_back(ident());
        } while (accept(","));
      }
    } else if (kw == "module") {
      p.kind = PKind::ModuleStart;
      p.name = ident();
    } else if (kw == "contains") {
      p.kind = PKind::Contains;
    } else if (kw == "do") {
      p.kind = PKind::DoStart;
      p.stmt = parse_do(p.loc);
    } else if (kw == "enddo") {
      p.kind = PKind::EndDo;
    } else if (kw == "endif") {
      p.kind = PKind::EndIf;
    } else if (kw == "end") {
      parse_end(p);
    } else if (kw == "else") {
      if (peek().kind == Tok::Ident && peek().text == "if") {
        next();
        p.kind = PKind::ElseIf;
        p.cond = paren_expr();
        expect_ident("then");
      } else {
        p.kind = PKind::Else;
      }
    } else if (kw == "elseif") {
      p.kind = PKind::ElseIf;
      p.cond = paren_expr();
      expect_ident("then");
    } else if (kw == "if") {
      ExprPtr cond = paren_expr();
      if (peek().kind == Tok::Ident && peek().text == "then" && toks_[pos_ + 1].kind == Tok::End) {
        next();
        p.kind = PKind::IfThen;
        p.cond = cond;
      } else if (peek().kind == Tok::Int) {
        throw UnsupportedFeature(path_, p.loc.line, "arithmetic IF");
      } else {
        p.kind = PKind::Exec;
        Stmt s;
        s.kind = StmtKind::If;
        s.loc = p.loc;
        s.cond = cond;
        s.logicalIf = true;
        s.thenBody.push_back(simple_statement());
        p.stmt = std::move(s);
      }
    } else {
      // call / return / continue
      --pos_;
      p.kind = PKind::Exec;
      p.stmt = simple_statement();
      return p;
    }
    expect_end();
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(path_, peek().loc.line, peek().loc.col, msg); }
  bool accept(const std::string& op) {
    if ((peek().kind == Tok::Op) && peek().text == op) {
      next();
      return true;
    }
    return false;
  }
  void expect(const std::string& op) {
    if (!accept(op)) fail("expected '" + op + "'");
  }
  void expect_ident(const std::string& word) {
    if (peek().kind != Tok::Ident || peek().text != word) fail("expected '" + word + "'");
    next();
  }
  void expect_end() {
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
  }
  std::string ident() {
    if (peek().kind != Tok::Ident) fail("expected a name");
    return next().text;
  }

  bool is_assignment() const {
    if (toks_.size() < 2) return false;
    if (toks_[1].kind == Tok::Op && toks_[1].text == "=") return true;
    if (toks_[1].kind == Tok::Op && toks_[1].text == "(") {
      int depth = 0;
      for (std::size_t i = 1; i < toks_.size(); ++i) {
        if (toks_[i].kind == Tok::Op && toks_[i].text == "(") ++depth;
        if (toks_[i].kind == Tok::Op && toks_[i].text == ")") {
          if (--depth == 0) {
            return i + 1 < toks_.size() && toks_[i + 1].kind == Tok::Op && toks_[i + 1].text == "=";
          }
        }
      }
    }
    return false;
  }

  std::vector<std::string> dummy_list() {
    std::vector<std::string> out;
    if (accept("(")) {
      if (accept(")")) return out;
      do {
        out.push_back(ident());
      } while (accept(","));
      expect(")");
    }
    return out;
  }

  std::vector<Dim> dim_list() {
    std::vector<Dim> dims;
    expect("(");
    do {
      if (peek().kind == Tok::Op && peek().text == "*") {
        throw UnsupportedFeature(path_, peek().loc.line, "assumed-size array");
      }
      Dim d;
      ExprPtr first = expr();
      if (accept(":")) {
        d.lo = first;
        d.hi = expr();
      } else {
        d.hi = first;
      }
      dims.push_back(d);
    } while (accept(","));
    expect(")");
    return dims;
  }

  std::vector<Entity> entity_list(bool allow_init) {
    std::vector<Entity> out;
    do {
      Entity e;
      e.loc = peek().loc;
      e.name = ident();
      if (peek().kind == Tok::Op && peek().text == "(") e.dims = dim_list();
      if (allow_init && accept("=")) e.init = expr();
      out.push_back(std::move(e));
    } while (accept(","));
    return out;
  }

  void parse_type_decl(Parsed& p) {
    bool f95 = false;
    while (accept(",")) {
      f95 = true;
      std::string attr = ident();
      if (attr == "parameter") {
        p.parameterAttr = true;
      } else if (attr == "intent") {
        expect("(");
        std::string w = ident();
        if (w == "in" && peek().kind == Tok::Ident && peek().text == "out") {
          next();
          w = "inout";
        }
        expect(")");
        if (w == "in") p.intent = Intent::In;
        else if (w == "out") p.intent = Intent::Out;
        else if (w == "inout") p.intent = Intent::InOut;
        else fail("bad intent");
      } else {
        throw UnsupportedFeature(path_, p.loc.line, "type attribute " + attr);
      }
    }
    if (f95 || (peek().kind == Tok::Op && peek().text == "::")) expect("::");
    p.entities = entity_list(p.parameterAttr);
  }

  void parse_common(Parsed& p) {
    do {
      std::string block;
      if (accept("/")) {
        if (!accept("/")) {
          block = ident();
          expect("/");
        }
      }
      std::vector<Entity> vars;
      do {
        Entity e;
        e.loc = peek().loc;
        e.name = ident();
        if (peek().kind == Tok::Op && peek().text == "(") e.dims = dim_list();
        vars.push_back(std::move(e));
      } while (peek().kind == Tok::Op && peek().text == "," && toks_[pos_ + 1].kind == Tok::Ident && (next(), true));
      p.blocks.emplace_back(block, std::move(vars));
      accept(",");
    } while (peek().kind == Tok::Op && peek().text == "/");
  }

  void parse_end(Parsed& p) {
    if (peek().kind == Tok::End) {
      p.kind = PKind::End;
      return;
    }
    std::string w = ident();
    if (w == "do") {
      p.kind = PKind::EndDo;
    } else if (w == "if") {
      p.kind = PKind::EndIf;
    } else if (w == "module") {
      p.kind = PKind::EndModule;
      if (peek().kind == Tok::Ident) p.name = ident();
    } else if (w == "program" || w == "subroutine" || w == "function") {
      p.kind = PKind::End;
      if (peek().kind == Tok::Ident) p.name = ident();
    } else {
      fail("unrecognized END statement");
    }
  }

  Stmt parse_do(SourceLoc loc) {
    Stmt s;
    s.kind = StmtKind::Do;
    s.loc = loc;
    if (peek().kind == Tok::Ident && peek().text == "while") throw UnsupportedFeature(path_, loc.line, "DO WHILE");
    if (peek().kind == Tok::Int) {
      s.doLabel = std::stoi(next().text);
      accept(",");
    }
    s.var = ident();
    expect("=");
    s.lo = expr();
    expect(",");
    s.hi = expr();
    if (accept(",")) {
      s.step = expr();
      if (s.step->kind == ExprKind::IntConst && s.step->ival == 0) fail("DO step must be nonzero");
    }
    return s;
  }

  Stmt parse_assignment() {
    Stmt s;
    s.kind = StmtKind::Assign;
    s.loc = peek().loc;
    s.lhs = primary();
    if (s.lhs->kind != ExprKind::Var && s.lhs->kind != ExprKind::Call) fail("invalid assignment target");
    expect("=");
    s.rhs = expr();
    return s;
  }

  Stmt simple_statement() {
    Stmt s;
    s.loc = peek().loc;
    if (is_assignment_here()) return parse_assignment();
    std::string kw = ident();
    if (kw == "call") {
      s.kind = StmtKind::Call;
      s.callee = ident();
      if (accept("(")) {
        if (!accept(")")) {
          do {
            s.args.push_back(expr());
          } while (accept(","));
          expect(")");
        }
      }
    } else if (kw == "return") {
      s.kind = StmtKind::Return;
    } else if (kw == "continue") {
      s.kind = StmtKind::Continue;
    } else {
      auto un = unsupported_keywords().find(kw);
      if (un != unsupported_keywords().end()) throw UnsupportedFeature(path_, s.loc.line, un->second);
      fail("statement not allowed here");
    }
    expect_end();
    return s;
  }

  bool is_assignment_here() const {
    if (peek().kind != Tok::Ident) return false;
    const Token& t1 = toks_[pos_ + 1];
    if (t1.kind == Tok::Op && t1.text == "=") return true;
    if (t1.kind == Tok::Op && t1.text == "(") {
      int depth = 0;
      for (std::size_t i = pos_ + 1; i < toks_.size(); ++i) {
        if (toks_[i].kind == Tok::Op && toks_[i].text == "(") ++depth;
        if (toks_[i].kind == Tok::Op && toks_[i].text == ")" && --depth == 0) {
          return i + 1 < toks_.size() && toks_[i + 1].kind == Tok::Op && toks_[i + 1].text == "=";
        }
      }
    }
    return false;
  }

  ExprPtr paren_expr() {
    expect("(");
    ExprPtr e = expr();
    expect(")");
    return e;
  }

  // expr := or_expr
  ExprPtr expr() { return or_expr(); }

  ExprPtr or_expr() {
    ExprPtr l = and_expr();
    while (peek().kind == Tok::DotOp && peek().text == "or") {
      SourceLoc loc = next().loc;
      l = make_binary(BinOp::Or, l, and_expr(), loc);
    }
    return l;
  }

  ExprPtr and_expr() {
    ExprPtr l = not_expr();
    while (peek().kind == Tok::DotOp && peek().text == "and") {
      SourceLoc loc = next().loc;
      l = make_binary(BinOp::And, l, not_expr(), loc);
    }
    return l;
  }

  ExprPtr not_expr() {
    if (peek().kind == Tok::DotOp && peek().text == "not") {
      SourceLoc loc = next().loc;
      return make_unary(UnOp::Not, not_expr(), loc);
    }
    return rel_expr();
  }

  std::optional<BinOp> rel_op() const {
    const Token& t = peek();
    if (t.kind == Tok::DotOp) {
      if (t.text == "lt") return BinOp::Lt;
      if (t.text == "le") return BinOp::Le;
      if (t.text == "gt") return BinOp::Gt;
      if (t.text == "ge") return BinOp::Ge;
      if (t.text == "eq") return BinOp::Eq;
      if (t.text == "ne") return BinOp::Ne;
    } else if (t.kind == Tok::Op) {
      if (t.text == "<") return BinOp::Lt;
      if (t.text == "<=") return BinOp::Le;
      if (t.text == ">") return BinOp::Gt;
      if (t.text == ">=") return BinOp::Ge;
      if (t.text == "==") return BinOp::Eq;
      if (t.text == "/=") return BinOp::Ne;
    }
    return std::nullopt;
  }

  ExprPtr rel_expr() {
    ExprPtr l = add_expr();
    if (auto op = rel_op()) {
      SourceLoc loc = next().loc;
      l = make_binary(*op, l, add_expr(), loc);
      if (rel_op()) fail("chained relational operators");
    }
    return l;
  }

  ExprPtr add_expr() {
    ExprPtr l;
    if (peek().kind == Tok::Op && (peek().text == "-" || peek().text == "+")) {
      SourceLoc loc = peek().loc;
      UnOp op = next().text == "-" ? UnOp::Neg : UnOp::Plus;
      l = make_unary(op, mul_expr(), loc);
    } else {
      l = mul_expr();
    }
    while (peek().kind == Tok::Op && (peek().text == "+" || peek().text == "-")) {
      SourceLoc loc = peek().loc;
      BinOp op = next().text == "+" ? BinOp::Add : BinOp::Sub;
      l = make_binary(op, l, mul_expr(), loc);
    }
    return l;
  }

  ExprPtr mul_expr() {
    ExprPtr l = primary();
    while (peek().kind == Tok::Op && (peek().text == "*" || peek().text == "/")) {
      SourceLoc loc = peek().loc;
      BinOp op = next().text == "*" ? BinOp::Mul : BinOp::Div;
      l = make_binary(op, l, primary(), loc);
    }
    return l;
  }

  ExprPtr primary() {
    const Token& t = peek();
    SourceLoc loc = t.loc;
    switch (t.kind) {
      case Tok::Int: {
        long long v = std::stoll(next().text);
        if (v > 2147483647LL) throw SyntaxError(path_, loc.line, loc.col, "integer constant out of range");
        return make_int(static_cast<std::int32_t>(v), loc);
      }
      case Tok::Real:
        return make_real(next().text, loc);
      case Tok::DotOp:
        if (t.text == "true" || t.text == "false") {
          bool v = next().text == "true";
          return make_logical(v, loc);
        }
        fail("unexpected operator");
      case Tok::Ident: {
        std::string name = next().text;
        if (accept("(")) {
          std::vector<ExprPtr> args;
          if (!accept(")")) {
            do {
              args.push_back(expr());
            } while (accept(","));
            expect(")");
          }
          // Resolved to ArrayRef once the unit's declarations are known.
          return make_call(name, std::move(args), loc);
        }
        return make_var(name, loc);
      }
      case Tok::Op:
        if (t.text == "(") {
          next();
          ExprPtr e = expr();
          expect(")");
          return e;
        }
        if (t.text == "-" || t.text == "+") fail("unary operator must be parenthesized here");
        fail("unexpected '" + t.text + "'");
      case Tok::End:
        fail("unexpected end of statement");
    }
    fail("bad expression");
  }

  std::vector<Token> toks_;
  std::string path_;
  std::size_t pos_ = 0;
};

// ---- unit assembly ----------------------------------------------------------

class UnitBuilder {
 public:
  UnitBuilder(std::string path, bool free_form) : path_(std::move(path)), free_(free_form) {}

  void feed(const LogicalLine& ll) {
    Parsed p = StatementParser(tokenize(ll, path_), path_).parse();
    int label = ll.label;
    switch (p.kind) {
      case PKind::ProgramStart:
      case PKind::SubroutineStart:
      case PKind::FunctionStart:
        start_unit(p);
        return;
      case PKind::ModuleStart:
        if (cur_) fail(p.loc, "MODULE inside a program unit");
        module_ = p.name;
        return;
      case PKind::Contains:
        if (module_.empty()) throw UnsupportedFeature(path_, p.loc.line, "internal procedures");
        return;
      case PKind::EndModule:
        module_.clear();
        return;
      default:
        break;
    }
    ensure_unit(p.loc);
    switch (p.kind) {
      case PKind::End:
        if (!frames_.empty()) fail(p.loc, "END reached inside an unterminated DO or IF block");
        finish_unit();
        return;
      case PKind::TypeDecl:
        for (auto& e : p.entities) {
          Decl& d = declare(e);
          if (d.type && *d.type != *p.type) cur_->typeConflicts.push_back(d.name);
          d.type = p.type;
          if (p.intent) d.intent = p.intent;
          if (p.parameterAttr) d.paramValue = e.init;
        }
        return;
      case PKind::Dimension:
        for (auto& e : p.entities) declare(e);
        return;
      case PKind::Parameter:
        for (auto& e : p.entities) {
          Decl& d = cur_->decl_for(e.name);
          if (d.loc.line == 0) d.loc = e.loc;
          d.paramValue = e.init;
        }
        return;
      case PKind::Common:
        for (auto& [block, vars] : p.blocks) {
          CommonBlock* cb = nullptr;
          for (auto& b : cur_->commonBlocks) {
            if (b.name == block) cb = &b;
          }
          if (!cb) {
            cur_->commonBlocks.push_back(CommonBlock{block, {}, p.loc});
            cb = &cur_->commonBlocks.back();
          }
          for (auto& e : vars) {
            if (cur_->common_block_of(e.name)) fail(e.loc, "'" + e.name + "' appears in COMMON twice");
            declare(e);
            cb->vars.push_back(e.name);
          }
        }
        return;
      case PKind::ImplicitNone:
        cur_->implicitNone = true;
        return;
      case PKind::Use:
        cur_->uses.push_back(UseClause{p.name, p.names});
        return;
      case PKind::Exec: {
        Stmt s = std::move(p.stmt);
        s.label = label;
        append(std::move(s));
        close_labelled(label);
        return;
      }
      case PKind::DoStart: {
        Stmt s = std::move(p.stmt);
        s.label = label;
        frames_.push_back(Frame{std::move(s), false});
        return;
      }
      case PKind::EndDo: {
        if (frames_.empty() || frames_.back().stmt.kind != StmtKind::Do || frames_.back().stmt.doLabel != 0) {
          fail(p.loc, "END DO without a matching DO");
        }
        pop_and_attach();
        close_labelled(label);
        return;
      }
      case PKind::IfThen: {
        Stmt s;
        s.kind = StmtKind::If;
        s.loc = p.loc;
        s.label = label;
        s.cond = p.cond;
        frames_.push_back(Frame{std::move(s), false});
        return;
      }
      case PKind::ElseIf: {
        Frame& f = top_if(p.loc, "ELSE IF");
        f.inElse = true;
        Stmt s;
        s.kind = StmtKind::If;
        s.loc = p.loc;
        s.cond = p.cond;
        s.elseIf = true;
        frames_.push_back(Frame{std::move(s), false});
        return;
      }
      case PKind::Else: {
        Frame& f = top_if(p.loc, "ELSE");
        if (f.inElse) fail(p.loc, "duplicate ELSE");
        f.inElse = true;
        return;
      }
      case PKind::EndIf: {
        top_if(p.loc, "END IF");
        for (;;) {
          bool was_else_if = frames_.back().stmt.elseIf;
          pop_and_attach();
          if (!was_else_if) break;
        }
        close_labelled(label);
        return;
      }
      default:
        fail(p.loc, "unexpected statement");
    }
  }

  std::vector<SourceUnit> finish(int last_line) {
    if (cur_) {
      if (free_) fail(SourceLoc{last_line, 1}, "missing END for unit '" + cur_->name + "'");
      fail(SourceLoc{last_line, 1}, "missing END statement");
    }
    return std::move(units_);
  }

 private:
  struct Frame {
    Stmt stmt;
    bool inElse = false;
  };

  [[noreturn]] void fail(SourceLoc loc, const std::string& msg) const {
    throw SyntaxError(path_, loc.line, loc.col, msg);
  }

  void start_unit(const Parsed& p) {
    if (cur_) fail(p.loc, "program unit started before END of '" + cur_->name + "'");
    SourceUnit u;
    u.path = path_;
    u.name = p.name;
    u.loc = p.loc;
    u.args = p.names;
    u.kind = p.kind == PKind::ProgramStart ? UnitKind::Program
             : p.kind == PKind::SubroutineStart ? UnitKind::Subroutine
                                                : UnitKind::Function;
    u.moduleName = module_;
    if (p.kind == PKind::FunctionStart && p.type) {
      Decl& d = u.decl_for(u.name);
      d.type = p.type;
      d.loc = p.loc;
    }
    cur_ = std::move(u);
  }

  void ensure_unit(SourceLoc loc) {
    if (cur_) return;
    if (free_) fail(loc, "statement outside a program unit");
    // F77 allows the main program to omit its PROGRAM statement.
    SourceUnit u;
    u.path = path_;
    u.name = "main";
    u.kind = UnitKind::Program;
    u.loc = loc;
    cur_ = std::move(u);
  }

  Decl& declare(const Entity& e) {
    Decl& d = cur_->decl_for(e.name);
    if (d.loc.line == 0) d.loc = e.loc;
    if (!e.dims.empty()) {
      if (!d.dims.empty()) fail(e.loc, "dimensions of '" + e.name + "' given twice");
      d.dims = e.dims;
    }
    return d;
  }

  Frame& top_if(SourceLoc loc, const char* what) {
    if (frames_.empty() || frames_.back().stmt.kind != StmtKind::If) {
      fail(loc, std::string(what) + " without a matching IF THEN");
    }
    return frames_.back();
  }

  std::vector<Stmt>& target() {
    if (frames_.empty()) return cur_->body;
    Frame& f = frames_.back();
    if (f.stmt.kind == StmtKind::Do) return f.stmt.body;
    return f.inElse ? f.stmt.elseBody : f.stmt.thenBody;
  }

  void append(Stmt s) { target().push_back(std::move(s)); }

  void pop_and_attach() {
    Stmt s = std::move(frames_.back().stmt);
    frames_.pop_back();
    append(std::move(s));
  }

  void close_labelled(int label) {
    if (label == 0) return;
    while (!frames_.empty() && frames_.back().stmt.kind == StmtKind::Do && frames_.back().stmt.doLabel == label) {
      pop_and_attach();
    }
    for (const auto& f : frames_) {
      if (f.stmt.kind == StmtKind::Do && f.stmt.doLabel == label) {
        fail(f.stmt.loc, "DO " + std::to_string(label) + " terminates inside an inner block");
      }
    }
  }

  void finish_unit() {
    resolve_array_refs(*cur_);
    units_.push_back(std::move(*cur_));
    cur_.reset();
  }

  void resolve_array_refs(SourceUnit& u) {
    auto fn = [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind != ExprKind::Call || !u.is_array(e->name)) return nullptr;
      return make_array_ref(e->name, e->args, e->loc);
    };
    u.body = rewrite_exprs(std::move(u.body), fn);
    for_each_stmt(u.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::Assign && s.lhs->kind == ExprKind::Call) {
        throw UnsupportedFeature(path_, s.loc.line, "statement function");
      }
    });
  }

  std::string path_;
  bool free_;
  std::string module_;
  std::optional<SourceUnit> cur_;
  std::vector<Frame> frames_;
  std::vector<SourceUnit> units_;
};

int line_count(std::string_view text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n')) + 1;
}

}  // namespace

std::vector<SourceUnit> parse_source(std::string_view text, const std::string& path) {
  UnitBuilder b(path, false);
  for (const auto& ll : split_fixed(text, path)) b.feed(ll);
  return b.finish(line_count(text));
}

std::vector<SourceUnit> parse_free_form(std::string_view text, const std::string& path) {
  UnitBuilder b(path, true);
  for (const auto& ll : split_free(text, path)) b.feed(ll);
  return b.finish(line_count(text));
}

}  // namespace sf
