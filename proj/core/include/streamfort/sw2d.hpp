#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "streamfort/value.hpp"

namespace sf::sw2d {

struct ModelParams {
  int nx = 32;
  int ny = 32;
  int nt = 100;
  float dt = 0.01F;
  float dx = 1.0F;
  float g = 9.81F;
  float eps = 0.05F;
  /// Undisturbed depth and height of the initial square pulse, m.
  float h0 = 10.0F;
  float pulse = 1.0F;
  /// Cells at or below this depth are dry.
  float hmin = 0.1F;

  /// Throws CflViolation, or Error for bad sizes and eps outside [0, 1].
  void validate() const;
  /// PARAMETER overrides that make the corpus program run this setup.
  std::map<std::string, double> overrides() const;
  std::string to_json() const;
  static ModelParams from_json(const std::string& text);
  static ModelParams load(const std::string& path);
};

/// Fields on (0:ny+1, 0:nx+1), row-major with j the slow index.
struct State {
  int nx = 0;
  int ny = 0;
  std::vector<float> eta, etan, etaf, h, h0, u, v, un, vn;
  std::vector<std::int32_t> wet;

  std::size_t at(int j, int k) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx + 2) + static_cast<std::size_t>(k); }
  std::size_t size() const { return static_cast<std::size_t>(nx + 2) * static_cast<std::size_t>(ny + 2); }
  /// Sum of eta over the interior, ascending j then k.
  double volume() const;
  bool operator==(const State&) const = default;
};

State initial_state(const ModelParams& p);

/// un, vn, etan from the current state. Throws CflViolation when the
/// deepest cell breaks the time-step bound.
void dynamics_step(State& s, const ModelParams& p);
/// etaf from etan with dry neighbours replaced by the centre.
void shapiro_step(State& s, float eps);
void update_step(State& s, float hmin);
/// update . shapiro . dynamics; throws NonFiniteField on NaN or Inf.
void reference_step(State& s, const ModelParams& p);
State run_reference(const ModelParams& p, int nt);

void check_cfl(const State& s, const ModelParams& p);
void check_finite(const State& s);

/// Arrays named as in the corpus program.
HostState to_host(const State& s);
State from_host(const HostState& h);

/// Compared across evaluators: the fields the time loop carries.
inline const std::vector<std::string>& live_fields() {
  static const std::vector<std::string> names{"eta", "h", "u", "v", "wet"};
  return names;
}

/// `<stem>.bin` (little-endian words, row-major) and `<stem>.hdr` (text).
void write_field(const std::string& stem, const std::string& name, const Field& f);
Field read_field(const std::string& stem);

}  // namespace sf::sw2d
