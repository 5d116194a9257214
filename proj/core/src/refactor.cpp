#include "streamfort/refactor.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <set>

#include <json.hpp>

#include "streamfort/errors.hpp"
#include "streamfort/frontend.hpp"

namespace sf {

namespace {

using Units = std::vector<SourceUnit>;

ProgramAst relink(ProgramAst ast) { return link_units(std::move(ast.units)); }

std::set<std::string> referenced_names(const SourceUnit& u) {
  std::set<std::string> out;
  for_each_expr_in(u.body, [&](const Expr& e) {
    if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) out.insert(e.name);
  });
  for_each_stmt(u.body, [&](const Stmt& s) {
    if (s.kind == StmtKind::Do) out.insert(s.var);
  });
  return out;
}

// ---- loop normalization ----------------------------------------------------

int normalize_body(std::vector<Stmt>& body) {
  int n = 0;
  std::vector<Stmt> out;
  out.reserve(body.size());
  for (auto& s : body) {
    if (s.kind == StmtKind::Continue && s.label != 0) continue;
    if (s.kind == StmtKind::Do) {
      if (s.doLabel) ++n;
      s.doLabel = 0;
      n += normalize_body(s.body);
    } else if (s.kind == StmtKind::If) {
      n += normalize_body(s.thenBody);
      n += normalize_body(s.elseBody);
    }
    s.label = 0;
    out.push_back(std::move(s));
  }
  body = std::move(out);
  return n;
}

// ---- intent inference --------------------------------------------------------

enum : std::uint8_t { kNone = 1, kRead = 2, kWrite = 4 };

class IntentAnalysis {
 public:
  IntentAnalysis(const ProgramAst& ast, const std::map<std::pair<std::string, std::string>, Intent>& known)
      : ast_(ast), known_(known) {}

  Intent infer(const SourceUnit& u, const std::string& arg) {
    arg_ = arg;
    unit_ = &u;
    read_ = written_ = false;
    exits_ = 0;
    std::uint8_t end = stmts(u.body, kNone);
    std::uint8_t fin = end | exits_;
    if (!written_) return Intent::In;
    if (u.is_array(arg)) return read_ ? Intent::InOut : Intent::Out;
    return (fin & kRead) ? Intent::InOut : Intent::Out;
  }

 private:
  std::uint8_t event(std::uint8_t s, std::uint8_t ev) {
    if (ev == kRead) read_ = true;
    if (ev == kWrite) written_ = true;
    if (s & kNone) s = static_cast<std::uint8_t>((s & ~kNone) | ev);
    return s;
  }

  Intent callee_intent(const std::string& callee, std::size_t i) const {
    const SourceUnit* c = ast_.find_unit(callee);
    if (!c || i >= c->args.size()) return Intent::InOut;
    auto it = known_.find({callee, c->args[i]});
    return it == known_.end() ? Intent::InOut : it->second;
  }

  std::uint8_t actual(std::uint8_t s, const std::string& callee, std::size_t i, const ExprPtr& a) {
    if (a->kind == ExprKind::ArrayRef) {
      for (const auto& sub : a->args) s = expr(s, sub);
    }
    if ((a->kind == ExprKind::Var || a->kind == ExprKind::ArrayRef) && a->name == arg_) {
      Intent in = callee_intent(callee, i);
      if (in != Intent::Out) s = event(s, kRead);
      if (in != Intent::In) s = event(s, kWrite);
      return s;
    }
    if (a->kind == ExprKind::ArrayRef) return s;
    return expr(s, a);
  }

  std::uint8_t expr(std::uint8_t s, const ExprPtr& e) {
    if (!e) return s;
    switch (e->kind) {
      case ExprKind::Var:
        return e->name == arg_ ? event(s, kRead) : s;
      case ExprKind::ArrayRef:
        for (const auto& a : e->args) s = expr(s, a);
        return e->name == arg_ ? event(s, kRead) : s;
      case ExprKind::Call:
        if (is_intrinsic(e->name)) {
          for (const auto& a : e->args) s = expr(s, a);
          return s;
        }
        for (std::size_t i = 0; i < e->args.size(); ++i) s = actual(s, e->name, i, e->args[i]);
        return s;
      default:
        for (const auto& a : e->args) s = expr(s, a);
        return s;
    }
  }

  std::uint8_t stmts(const std::vector<Stmt>& ss, std::uint8_t s) {
    for (const auto& st : ss) s = stmt(st, s);
    return s;
  }

  std::uint8_t stmt(const Stmt& st, std::uint8_t s) {
    switch (st.kind) {
      case StmtKind::Assign:
        s = expr(s, st.rhs);
        if (st.lhs->kind == ExprKind::ArrayRef) {
          for (const auto& a : st.lhs->args) s = expr(s, a);
        }
        return st.lhs->name == arg_ ? event(s, kWrite) : s;
      case StmtKind::Do: {
        s = expr(s, st.lo);
        s = expr(s, st.hi);
        s = expr(s, st.step);
        std::uint8_t out = s;
        std::uint8_t cur = s;
        for (;;) {
          std::uint8_t t = cur;
          if (st.var == arg_) t = event(t, kWrite);
          t = stmts(st.body, t);
          if ((out | t) == out) break;
          out |= t;
          cur = t;
        }
        if (st.var == arg_) out = event(out, kWrite);
        return out;
      }
      case StmtKind::If: {
        s = expr(s, st.cond);
        return stmts(st.thenBody, s) | stmts(st.elseBody, s);
      }
      case StmtKind::Call:
        for (std::size_t i = 0; i < st.args.size(); ++i) s = actual(s, st.callee, i, st.args[i]);
        return s;
      case StmtKind::Return:
        exits_ |= s;
        return 0;
      case StmtKind::Continue:
        return s;
    }
    return s;
  }

  const ProgramAst& ast_;
  const std::map<std::pair<std::string, std::string>, Intent>& known_;
  const SourceUnit* unit_ = nullptr;
  std::string arg_;
  bool read_ = false;
  bool written_ = false;
  std::uint8_t exits_ = 0;
};

// ---- common block elimination -------------------------------------------

struct Block {
  std::string name;
  std::vector<std::string> canon;
  const SourceUnit* source = nullptr;
};

std::string block_tag(const std::string& name) { return name.empty() ? "blank" : name; }

const CommonBlock* find_block(const SourceUnit& u, const std::string& name) {
  for (const auto& cb : u.commonBlocks) {
    if (cb.name == name) return &cb;
  }
  return nullptr;
}

void copy_parameters(SourceUnit& dst, const SourceUnit& src, const ExprPtr& e) {
  if (!e) return;
  for_each_expr(e, [&](const Expr& x) {
    if (x.kind != ExprKind::Var) return;
    const Decl* p = src.find_decl(x.name);
    if (!p || !p->paramValue) return;
    const Decl* have = dst.find_decl(x.name);
    if (have) {
      if (!have->paramValue) throw ConflictingDeclaration(dst.name, x.name, "needed as a PARAMETER for a promoted bound");
      return;
    }
    dst.decls.push_back(*p);
    copy_parameters(dst, src, p->paramValue);
  });
}

}  // namespace

// ---- passes -----------------------------------------------------------------

ProgramAst normalize_loops(ProgramAst ast, RefactorReport* report) {
  int n = 0;
  for (auto& u : ast.units) n += normalize_body(u.body);
  if (report) report->loopsNormalized += n;
  return relink(std::move(ast));
}

ProgramAst make_types_explicit(ProgramAst ast, RefactorReport* report) {
  for (auto& u : ast.units) {
    if (!u.typeConflicts.empty()) {
      throw ConflictingDeclaration(u.name, u.typeConflicts.front(), "given two different types");
    }
    const SymbolTable& tab = ast.symbolTables.at(u.name);
    for (const auto& [name, sym] : tab) {
      if (sym.origin != Origin::Implicit || sym.kind == SymbolKind::External) continue;
      if (u.implicitNone) throw ConflictingDeclaration(u.name, name, "undeclared under IMPLICIT NONE");
      Decl& d = u.decl_for(name);
      d.type = sym.type;
      if (report) report->implicitDeclsAdded.emplace_back(u.name, name);
    }
    u.implicitNone = true;
    u.typeConflicts.clear();
  }
  return relink(std::move(ast));
}

ProgramAst eliminate_common_blocks(ProgramAst ast, RefactorReport* report) {
  std::vector<Block> blocks;
  auto visit_unit = [&](const SourceUnit& u) {
    for (const auto& cb : u.commonBlocks) {
      bool seen = std::any_of(blocks.begin(), blocks.end(), [&](const Block& b) { return b.name == cb.name; });
      if (!seen) blocks.push_back(Block{cb.name, cb.vars, &u});
    }
  };
  visit_unit(ast.program());
  for (const auto& u : ast.units) visit_unit(u);
  if (blocks.empty()) return ast;

  // Position i of block b is needed by u if u or anything it calls touches it.
  std::map<std::string, std::map<std::string, std::vector<bool>>> needs;
  std::map<std::string, std::set<std::string>> refs;
  for (const auto& u : ast.units) refs[u.name] = referenced_names(u);
  for (const auto& name : ast.bottom_up_order()) {
    const SourceUnit& u = *ast.find_unit(name);
    for (const auto& b : blocks) {
      std::vector<bool> need(b.canon.size(), false);
      if (const CommonBlock* cb = find_block(u, b.name)) {
        if (cb->vars.size() != b.canon.size()) {
          throw ConflictingDeclaration(u.name, "/" + b.name + "/", "COMMON block length differs between units");
        }
        for (std::size_t i = 0; i < need.size(); ++i) need[i] = refs[u.name].count(cb->vars[i]) > 0;
      }
      for (const auto& c : ast.callees(name)) {
        auto it = needs.find(c);
        if (it == needs.end()) continue;
        const auto& cn = it->second[b.name];
        for (std::size_t i = 0; i < need.size(); ++i) need[i] = need[i] || cn[i];
      }
      needs[name][b.name] = need;
    }
  }

  // Dummy names per (unit, block, position); the program keeps storage.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> names;
  for (auto& u : ast.units) {
    bool is_prog = u.kind == UnitKind::Program;
    std::set<std::string> taken;
    for (const auto& d : u.decls) taken.insert(d.name);
    for (const auto& a : u.args) taken.insert(a);
    taken.insert(refs[u.name].begin(), refs[u.name].end());
    taken.insert(u.name);
    for (const auto& b : blocks) {
      const CommonBlock* cb = find_block(u, b.name);
      std::vector<std::string>& nm = names[u.name][b.name];
      nm.assign(b.canon.size(), "");
      for (std::size_t i = 0; i < b.canon.size(); ++i) {
        if (cb) {
          nm[i] = cb->vars[i];
          continue;
        }
        bool callee_needs = false;
        for (const auto& c : ast.callees(u.name)) callee_needs = callee_needs || needs[c][b.name][i];
        if (!(is_prog ? callee_needs : needs[u.name][b.name][i])) continue;
        std::string n = b.canon[i];
        if (taken.count(n)) {
          std::string renamed = n + "_cmn_" + block_tag(b.name);
          if (report) report->nameClashes.push_back(u.name + ": " + n + " -> " + renamed);
          n = renamed;
        }
        taken.insert(n);
        nm[i] = n;
        const Decl* src = b.source->find_decl(b.canon[i]);
        Decl d = src ? *src : Decl{};
        d.name = n;
        d.intent.reset();
        if (!d.type) d.type = implicit_type(b.canon[i]);
        for (const auto& dim : d.dims) {
          copy_parameters(u, *b.source, dim.lo);
          copy_parameters(u, *b.source, dim.hi);
        }
        u.decls.push_back(d);
      }
    }
  }

  std::map<std::string, std::vector<std::pair<const Block*, std::size_t>>> promoted;
  for (auto& u : ast.units) {
    if (u.kind == UnitKind::Program) continue;
    for (const auto& b : blocks) {
      const auto& need = needs[u.name][b.name];
      const CommonBlock* cb = find_block(u, b.name);
      for (std::size_t i = 0; i < need.size(); ++i) {
        if (need[i]) {
          promoted[u.name].emplace_back(&b, i);
          u.args.push_back(names[u.name][b.name][i]);
          if (report) report->commonVarsPromoted[b.name][u.name].push_back(names[u.name][b.name][i]);
        } else if (cb) {
          std::string local = cb->vars[i];
          u.decls.erase(std::remove_if(u.decls.begin(), u.decls.end(), [&](const Decl& d) { return d.name == local; }),
                        u.decls.end());
        }
      }
    }
  }
  if (report) {
    for (const auto& b : blocks) {
      for (std::size_t i = 0; i < b.canon.size(); ++i) {
        bool used = false;
        for (const auto& u : ast.units) {
          if (u.kind != UnitKind::Program) used = used || needs[u.name][b.name][i];
        }
        if (!used) report->commonVarsDropped[b.name].push_back(b.canon[i]);
      }
    }
  }

  for (auto& u : ast.units) {
    auto extra = [&](const std::string& callee) {
      std::vector<ExprPtr> out;
      auto it = promoted.find(callee);
      if (it == promoted.end()) return out;
      for (const auto& [b, i] : it->second) out.push_back(make_var(names[u.name][b->name][i]));
      return out;
    };
    u.body = rewrite_exprs(std::move(u.body), [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind != ExprKind::Call || is_intrinsic(e->name)) return nullptr;
      auto more = extra(e->name);
      if (more.empty()) return nullptr;
      auto args = e->args;
      args.insert(args.end(), more.begin(), more.end());
      return make_call(e->name, std::move(args), e->loc);
    });
    std::function<void(std::vector<Stmt>&)> fix_calls = [&](std::vector<Stmt>& ss) {
      for (auto& s : ss) {
        if (s.kind == StmtKind::Call) {
          auto more = extra(s.callee);
          s.args.insert(s.args.end(), more.begin(), more.end());
        }
        fix_calls(s.body);
        fix_calls(s.thenBody);
        fix_calls(s.elseBody);
      }
    };
    fix_calls(u.body);
    u.commonBlocks.clear();
  }
  return relink(std::move(ast));
}

ProgramAst infer_intents(ProgramAst ast, RefactorReport* report) {
  std::map<std::pair<std::string, std::string>, Intent> known;
  for (const auto& name : ast.bottom_up_order()) {
    SourceUnit& u = *ast.find_unit(name);
    IntentAnalysis an(ast, known);
    std::vector<Intent> got;
    for (const auto& a : u.args) got.push_back(an.infer(u, a));
    for (std::size_t i = 0; i < u.args.size(); ++i) {
      known[{name, u.args[i]}] = got[i];
      u.decl_for(u.args[i]).intent = got[i];
      if (report) report->intentsInferred[{name, u.args[i]}] = got[i];
    }
  }
  return relink(std::move(ast));
}

ProgramAst modularize_units(ProgramAst ast) {
  for (auto& u : ast.units) {
    if (u.kind != UnitKind::Program) u.moduleName = "module_" + u.name;
  }
  for (auto& u : ast.units) {
    for (const auto& c : ast.callees(u.name)) {
      std::string mod = "module_" + c;
      bool have = std::any_of(u.uses.begin(), u.uses.end(), [&](const UseClause& x) { return x.module == mod; });
      if (!have) u.uses.push_back(UseClause{mod, {c}});
    }
  }
  return relink(std::move(ast));
}

ProgramAst refactor_all(ProgramAst ast, RefactorReport* report) {
  ast = normalize_loops(std::move(ast), report);
  ast = make_types_explicit(std::move(ast), report);
  ast = eliminate_common_blocks(std::move(ast), report);
  ast = infer_intents(std::move(ast), report);
  return modularize_units(std::move(ast));
}

std::map<std::string, std::string> emit_f95(const ProgramAst& ast) {
  std::map<std::string, std::string> out;
  for (const auto& u : ast.units) {
    std::string file = std::filesystem::path(u.path).stem().string() + ".f95";
    std::string& text = out[file];
    if (!text.empty()) text += "\n";
    text += print_free_form(u);
  }
  return out;
}

std::string RefactorReport::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json decls = nlohmann::ordered_json::array();
  for (const auto& [unit, name] : implicitDeclsAdded) decls.push_back({{"unit", unit}, {"name", name}});
  j["implicitDeclsAdded"] = {{"count", implicitDeclsAdded.size()}, {"list", decls}};
  nlohmann::ordered_json intents = nlohmann::ordered_json::object();
  for (const auto& [key, in] : intentsInferred) intents[key.first][key.second] = to_string(in);
  j["intentsInferred"] = intents;
  nlohmann::ordered_json promoted = nlohmann::ordered_json::object();
  for (const auto& [block, per_unit] : commonVarsPromoted) {
    for (const auto& [unit, vars] : per_unit) promoted[block_tag(block)][unit] = vars;
  }
  j["commonVarsPromoted"] = promoted;
  nlohmann::ordered_json dropped = nlohmann::ordered_json::object();
  for (const auto& [block, vars] : commonVarsDropped) dropped[block_tag(block)] = vars;
  j["commonVarsDropped"] = dropped;
  j["nameClashes"] = nameClashes;
  j["loopsNormalized"] = loopsNormalized;
  return j.dump(2) + "\n";
}

}  // namespace sf
