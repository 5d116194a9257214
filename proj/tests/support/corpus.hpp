#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "streamfort/analyzer.hpp"
#include "streamfort/driver.hpp"
#include "streamfort/frontend.hpp"
#include "streamfort/sw2d.hpp"

namespace sftest {

inline std::string corpus_dir() { return STREAMFORT_CORPUS_DIR; }

inline std::vector<std::string> corpus_files() {
  std::vector<std::string> out;
  for (const char* f : {"main.f", "dyn.f", "shapiro.f", "update.f"}) out.push_back(corpus_dir() + "/sw2d/" + f);
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const sf::ProgramAst& corpus_ast() {
  static const sf::ProgramAst ast = sf::load_sources(corpus_files());
  return ast;
}

inline sf::sw2d::ModelParams grid(int nx, int ny, int nt) {
  sf::sw2d::ModelParams p;
  p.nx = nx;
  p.ny = ny;
  p.nt = nt;
  return p;
}

inline sf::FunctionalIR corpus_ir(const sf::sw2d::ModelParams& p) {
  return sf::analyze_program(corpus_ast(), p.overrides());
}

/// Parse one fixed-form snippet given as lines of statement text; columns
/// 1-6 are filled in.
inline std::string fixed(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) {
    if (l.rfind("c ", 0) == 0 || l.rfind("!", 0) == 0) {
      s += l + "\n";
    } else if (l.size() > 1 && l[0] == '#') {
      // "#10 continue" puts a label in columns 1-5.
      auto sp = l.find(' ');
      std::string label = l.substr(1, sp - 1);
      s += label + std::string(6 - label.size(), ' ') + l.substr(sp + 1) + "\n";
    } else {
      s += "      " + l + "\n";
    }
  }
  return s;
}

inline sf::ProgramAst link_text(const std::string& text) { return sf::link_units(sf::parse_source(text, "t.f")); }

}  // namespace sftest
