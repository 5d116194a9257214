#include "streamfort/sw2d.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "streamfort/errors.hpp"

namespace sf::sw2d {

using json = nlohmann::ordered_json;

void ModelParams::validate() const {
  if (nx < 2 || ny < 2) throw Error("grid must be at least 2x2, got " + std::to_string(nx) + "x" + std::to_string(ny));
  if (nt < 0) throw Error("NT must not be negative");
  if (!(eps >= 0.0F && eps <= 1.0F)) throw Error("eps must lie in [0, 1], got " + std::to_string(eps));
  if (!(dt > 0.0F) || !(dx > 0.0F) || !(g > 0.0F)) throw Error("dt, dx and g must be positive");
  const float hmax = h0 + std::max(pulse, 0.0F);
  if (!(dt < dx / std::sqrt(g * hmax))) {
    throw CflViolation("dt = " + std::to_string(dt) + " violates the CFL bound " + std::to_string(dx / std::sqrt(g * hmax)) +
                       " for depth " + std::to_string(hmax));
  }
}

std::map<std::string, double> ModelParams::overrides() const {
  return {{"nx", nx}, {"ny", ny}, {"nt", nt}, {"dt", dt}, {"dx", dx}, {"g", g},
          {"eps", eps}, {"hzero", h0}, {"pulse", pulse}, {"hmin", hmin}};
}

std::string ModelParams::to_json() const {
  json j{{"nx", nx}, {"ny", ny}, {"NT", nt}, {"dt", dt}, {"dx", dx}, {"g", g}, {"eps", eps},
         {"init", {{"h0", h0}, {"pulse", pulse}}}, {"hmin", hmin}};
  return j.dump(2);
}

ModelParams ModelParams::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  if (!j.is_object()) throw Error("experiment config must be a JSON object");
  ModelParams p;
  try {
    p.nx = j.value("nx", p.nx);
    p.ny = j.value("ny", p.ny);
    p.nt = j.value("NT", p.nt);
    p.dt = j.value("dt", p.dt);
    p.dx = j.value("dx", p.dx);
    p.g = j.value("g", p.g);
    p.eps = j.value("eps", p.eps);
    p.hmin = j.value("hmin", p.hmin);
    if (j.contains("init")) {
      p.h0 = j["init"].value("h0", p.h0);
      p.pulse = j["init"].value("pulse", p.pulse);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  p.validate();
  return p;
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read experiment config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double State::volume() const {
  double s = 0.0;
  for (int j = 1; j <= ny; ++j) {
    for (int k = 1; k <= nx; ++k) s += eta[at(j, k)];
  }
  return s;
}

State initial_state(const ModelParams& p) {
  State s;
  s.nx = p.nx;
  s.ny = p.ny;
  for (auto* f : {&s.eta, &s.etan, &s.etaf, &s.h, &s.h0, &s.u, &s.v, &s.un, &s.vn}) f->assign(s.size(), 0.0F);
  s.wet.assign(s.size(), 0);
  const int wx = (p.nx * 2236) / 10000;
  const int wy = (p.ny * 2236) / 10000;
  for (int j = 1; j <= p.ny; ++j) {
    for (int k = 1; k <= p.nx; ++k) {
      s.h0[s.at(j, k)] = p.h0;
      if (std::abs(2 * k - p.nx - 1) <= wx && std::abs(2 * j - p.ny - 1) <= wy) s.eta[s.at(j, k)] = p.pulse;
    }
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.h[i] = s.h0[i] + s.eta[i];
    s.wet[i] = s.h[i] <= p.hmin ? 0 : 1;
  }
  return s;
}

void check_cfl(const State& s, const ModelParams& p) {
  const float hmax = *std::max_element(s.h.begin(), s.h.end());
  if (hmax > 0.0F && !(p.dt < p.dx / std::sqrt(p.g * hmax))) {
    throw CflViolation("dt = " + std::to_string(p.dt) + " violates the CFL bound at depth " + std::to_string(hmax));
  }
}

void check_finite(const State& s) {
  const std::pair<const char*, const std::vector<float>*> fields[] = {{"eta", &s.eta}, {"h", &s.h}, {"u", &s.u}, {"v", &s.v}};
  for (const auto& [name, f] : fields) {
    for (std::size_t i = 0; i < f->size(); ++i) {
      if (!std::isfinite((*f)[i])) throw NonFiniteField(std::string(name) + " is not finite at element " + std::to_string(i));
    }
  }
}

void dynamics_step(State& s, const ModelParams& p) {
  check_cfl(s, p);
  const float dt = p.dt;
  const float g = p.g;
  const float dx = p.dx;
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      const std::size_t c = s.at(j, k);
      const std::size_t e = s.at(j, k + 1);
      const std::size_t w = s.at(j, k - 1);
      const std::size_t n = s.at(j + 1, k);
      const std::size_t so = s.at(j - 1, k);
      float ue = 0.0F;
      if (k < s.nx) ue = s.u[c] - dt * g * (s.eta[e] - s.eta[c]) / dx;
      float uw = 0.0F;
      if (k > 1) uw = s.u[w] - dt * g * (s.eta[c] - s.eta[w]) / dx;
      float vnf = 0.0F;
      if (j < s.ny) vnf = s.v[c] - dt * g * (s.eta[n] - s.eta[c]) / dx;
      float vsf = 0.0F;
      if (j > 1) vsf = s.v[so] - dt * g * (s.eta[c] - s.eta[so]) / dx;
      const float fe = ue > 0.0F ? ue * s.h[c] : ue * s.h[e];
      const float fw = uw > 0.0F ? uw * s.h[w] : uw * s.h[c];
      const float fn = vnf > 0.0F ? vnf * s.h[c] : vnf * s.h[n];
      const float fs = vsf > 0.0F ? vsf * s.h[so] : vsf * s.h[c];
      s.un[c] = ue;
      s.vn[c] = vnf;
      s.etan[c] = s.eta[c] - dt * ((fe - fw) + (fn - fs)) / dx;
    }
  }
}

void shapiro_step(State& s, float eps) {
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      const std::size_t c = s.at(j, k);
      const float centre = s.etan[c];
      auto pick = [&](std::size_t i) { return s.wet[i] == 1 ? s.etan[i] : centre; };
      const float ce = pick(s.at(j, k + 1));
      const float cw = pick(s.at(j, k - 1));
      const float cn = pick(s.at(j + 1, k));
      const float cs = pick(s.at(j - 1, k));
      s.etaf[c] = (1.0F - eps) * centre + eps * 0.25F * ((ce + cw) + (cn + cs));
    }
  }
}

void update_step(State& s, float hmin) {
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      const std::size_t c = s.at(j, k);
      s.eta[c] = s.etaf[c];
      s.h[c] = s.h0[c] + s.eta[c];
      s.u[c] = s.un[c];
      s.v[c] = s.vn[c];
      s.wet[c] = 1;
      if (s.h[c] <= hmin) {
        s.wet[c] = 0;
        s.u[c] = 0.0F;
        s.v[c] = 0.0F;
      }
    }
  }
}

void reference_step(State& s, const ModelParams& p) {
  dynamics_step(s, p);
  shapiro_step(s, p.eps);
  update_step(s, p.hmin);
  check_finite(s);
}

State run_reference(const ModelParams& p, int nt) {
  State s = initial_state(p);
  for (int t = 0; t < nt; ++t) reference_step(s, p);
  return s;
}

namespace {

Shape grid_shape(int nx, int ny) { return Shape{{0, 0}, {ny + 1, nx + 1}}; }

Field real_field(const std::vector<float>& v, const Shape& shape) {
  Field f = Field::array(BaseType::Real, shape);
  std::transform(v.begin(), v.end(), f.data.begin(), [](float x) { return std::bit_cast<Word>(x); });
  return f;
}

std::vector<float> reals(const Field& f) {
  std::vector<float> v(f.data.size());
  std::transform(f.data.begin(), f.data.end(), v.begin(), [](Word w) { return std::bit_cast<float>(w); });
  return v;
}

const Field& need(const HostState& h, const std::string& name) {
  auto it = h.find(name);
  if (it == h.end()) throw ShapeMismatch("state lacks array '" + name + "'");
  return it->second;
}

}  // namespace

HostState to_host(const State& s) {
  const Shape shape = grid_shape(s.nx, s.ny);
  HostState h;
  h["eta"] = real_field(s.eta, shape);
  h["etan"] = real_field(s.etan, shape);
  h["etaf"] = real_field(s.etaf, shape);
  h["h"] = real_field(s.h, shape);
  h["h0"] = real_field(s.h0, shape);
  h["u"] = real_field(s.u, shape);
  h["v"] = real_field(s.v, shape);
  h["un"] = real_field(s.un, shape);
  h["vn"] = real_field(s.vn, shape);
  Field wet = Field::array(BaseType::Integer, shape);
  std::transform(s.wet.begin(), s.wet.end(), wet.data.begin(), [](std::int32_t x) { return std::bit_cast<Word>(x); });
  h["wet"] = std::move(wet);
  return h;
}

State from_host(const HostState& h) {
  const Field& eta = need(h, "eta");
  if (eta.shape.rank() != 2 || eta.shape.lo != std::vector<std::int64_t>{0, 0}) {
    throw ShapeMismatch("eta must be indexed from (0, 0), got " + eta.shape.str());
  }
  State s;
  s.ny = static_cast<int>(eta.shape.hi[0]) - 1;
  s.nx = static_cast<int>(eta.shape.hi[1]) - 1;
  std::pair<const char*, std::vector<float>*> fields[] = {{"eta", &s.eta}, {"etan", &s.etan}, {"etaf", &s.etaf},
                                                          {"h", &s.h},     {"h0", &s.h0},     {"u", &s.u},
                                                          {"v", &s.v},     {"un", &s.un},     {"vn", &s.vn}};
  for (auto& [name, dst] : fields) {
    auto it = h.find(name);
    if (it == h.end()) {
      dst->assign(s.size(), 0.0F);
      continue;
    }
    if (!(it->second.shape == eta.shape)) throw ShapeMismatch(std::string(name) + " is " + it->second.shape.str());
    *dst = reals(it->second);
  }
  const Field& wet = need(h, "wet");
  if (!(wet.shape == eta.shape)) throw ShapeMismatch("wet is " + wet.shape.str());
  s.wet.resize(wet.data.size());
  std::transform(wet.data.begin(), wet.data.end(), s.wet.begin(), [](Word w) { return std::bit_cast<std::int32_t>(w); });
  return s;
}

void write_field(const std::string& stem, const std::string& name, const Field& f) {
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot write '" + stem + ".bin'");
  for (Word w : f.data) {
    const unsigned char b[4] = {static_cast<unsigned char>(w), static_cast<unsigned char>(w >> 8),
                                static_cast<unsigned char>(w >> 16), static_cast<unsigned char>(w >> 24)};
    bin.write(reinterpret_cast<const char*>(b), 4);
  }
  std::ofstream hdr(stem + ".hdr");
  if (!hdr) throw Error("cannot write '" + stem + ".hdr'");
  hdr << "name " << name << "\n";
  hdr << "type " << (f.type == BaseType::Real ? "float32" : "int32") << "\n";
  hdr << "endian little\norder row-major\n";
  hdr << "lo";
  for (auto x : f.shape.lo) hdr << ' ' << x;
  hdr << "\nhi";
  for (auto x : f.shape.hi) hdr << ' ' << x;
  hdr << "\n";
}

Field read_field(const std::string& stem) {
  std::ifstream hdr(stem + ".hdr");
  if (!hdr) throw Error("cannot read '" + stem + ".hdr'");
  Field f;
  std::string line;
  while (std::getline(hdr, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "type") {
      std::string t;
      ls >> t;
      if (t == "float32") {
        f.type = BaseType::Real;
      } else if (t == "int32") {
        f.type = BaseType::Integer;
      } else {
        throw Error("'" + stem + ".hdr': unknown type " + t);
      }
    } else if (key == "lo" || key == "hi") {
      auto& dst = key == "lo" ? f.shape.lo : f.shape.hi;
      for (std::int64_t x; ls >> x;) dst.push_back(x);
    }
  }
  if (f.shape.lo.size() != f.shape.hi.size()) throw Error("'" + stem + ".hdr': lo and hi differ in rank");
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot read '" + stem + ".bin'");
  f.data.assign(static_cast<std::size_t>(f.shape.size()), 0);
  for (auto& w : f.data) {
    unsigned char b[4];
    if (!bin.read(reinterpret_cast<char*>(b), 4)) throw Error("'" + stem + ".bin' is shorter than its header says");
    w = Word{b[0]} | Word{b[1]} << 8 | Word{b[2]} << 16 | Word{b[3]} << 24;
  }
  if (bin.peek() != std::char_traits<char>::eof()) throw Error("'" + stem + ".bin' is longer than its header says");
  return f;
}

}  // namespace sf::sw2d
