#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "corpus.hpp"
#include "streamfort/errors.hpp"
#include "streamfort/sw2d.hpp"

using namespace sf;
using sw2d::ModelParams;
using sw2d::State;

namespace {

ModelParams rest(int n, int nt) {
  ModelParams p = sftest::grid(n, n, nt);
  p.pulse = 0.0F;
  return p;
}

/// Mirror images of the interior: k -> nx+1-k, j -> ny+1-j, and the transpose.
bool mirror_x(const std::vector<float>& f, const State& s) {
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      if (f[s.at(j, k)] != f[s.at(j, s.nx + 1 - k)]) return false;
    }
  }
  return true;
}

bool mirror_y(const std::vector<float>& f, const State& s) {
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      if (f[s.at(j, k)] != f[s.at(s.ny + 1 - j, k)]) return false;
    }
  }
  return true;
}

bool transposed(const std::vector<float>& f, const State& s) {
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) {
      if (f[s.at(j, k)] != f[s.at(k, j)]) return false;
    }
  }
  return true;
}

double interior_sum(const std::vector<float>& f, const State& s) {
  double t = 0.0;
  for (int j = 1; j <= s.ny; ++j) {
    for (int k = 1; k <= s.nx; ++k) t += f[s.at(j, k)];
  }
  return t;
}

State random_wet(int n, std::uint32_t seed) {
  State s = sw2d::initial_state(rest(n, 1));
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> e(0.0F, 0.5F);
  std::uniform_real_distribution<float> w(-0.2F, 0.2F);
  for (int j = 1; j <= n; ++j) {
    for (int k = 1; k <= n; ++k) {
      auto i = s.at(j, k);
      s.eta[i] = e(rng);
      s.h[i] = s.h0[i] + s.eta[i];
      s.u[i] = k < n ? w(rng) : 0.0F;
      s.v[i] = j < n ? w(rng) : 0.0F;
    }
  }
  return s;
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("streamfort_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Sw2d, DefaultsAndPulse) {
  ModelParams p;
  EXPECT_EQ(p.nx, 32);
  EXPECT_EQ(p.dt, 0.01F);
  EXPECT_EQ(p.dx, 1.0F);
  EXPECT_EQ(p.eps, 0.05F);
  State s = sw2d::initial_state(p);
  int pulse = 0;
  for (float e : s.eta) pulse += e == 1.0F ? 1 : 0;
  EXPECT_EQ(pulse, 64);
  EXPECT_TRUE(mirror_x(s.eta, s) && mirror_y(s.eta, s) && transposed(s.eta, s));
  EXPECT_EQ(s.wet[s.at(0, 0)], 0);
  EXPECT_EQ(s.wet[s.at(1, 1)], 1);
}

TEST(Sw2d, ValidateRejectsBadSetups) {
  ModelParams p;
  p.dt = 1.0F;
  EXPECT_THROW(p.validate(), CflViolation);
  p = ModelParams{};
  p.eps = 1.5F;
  EXPECT_THROW(p.validate(), Error);
  p = ModelParams{};
  p.nx = 0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_NO_THROW(ModelParams{}.validate());
}

TEST(Sw2d, ConfigRoundTrip) {
  ModelParams p = sftest::grid(20, 12, 7);
  p.eps = 0.1F;
  p.pulse = 0.5F;
  auto q = ModelParams::from_json(p.to_json());
  EXPECT_EQ(q.nx, 20);
  EXPECT_EQ(q.ny, 12);
  EXPECT_EQ(q.nt, 7);
  EXPECT_EQ(q.eps, 0.1F);
  EXPECT_EQ(q.pulse, 0.5F);
  auto cfg = ModelParams::load(sftest::corpus_dir() + "/sw2d/experiments/standard_32x32.json");
  EXPECT_EQ(cfg.nx, 32);
  EXPECT_EQ(cfg.nt, 100);
}

TEST(Sw2d, DynamicsFixedPoint) {
  State s = sw2d::initial_state(rest(10, 1));
  State before = s;
  sw2d::dynamics_step(s, rest(10, 1));
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.un[i], 0.0F);
    EXPECT_EQ(s.vn[i], 0.0F);
    EXPECT_EQ(s.etan[i], 0.0F);
  }
  EXPECT_EQ(s.eta, before.eta);
}

TEST(Sw2d, LakeAtRestStaysAtRest) {
  State s = sw2d::run_reference(rest(16, 500), 500);
  State init = sw2d::initial_state(rest(16, 500));
  EXPECT_EQ(s.eta, init.eta);
  EXPECT_EQ(s.u, init.u);
  EXPECT_EQ(s.v, init.v);
  EXPECT_EQ(s.h, init.h);
}

TEST(Sw2d, SingleCellHumpKeepsFourFoldSymmetry) {
  ModelParams p = rest(9, 1);
  State s = sw2d::initial_state(p);
  s.eta[s.at(5, 5)] = 1.0F;
  s.h[s.at(5, 5)] = s.h0[s.at(5, 5)] + 1.0F;
  sw2d::dynamics_step(s, p);
  EXPECT_TRUE(mirror_x(s.etan, s));
  EXPECT_TRUE(mirror_y(s.etan, s));
  EXPECT_TRUE(transposed(s.etan, s));
  // East faces of a column mirror west faces of its partner with opposite sign.
  for (int j = 1; j <= 9; ++j) {
    for (int k = 1; k < 9; ++k) EXPECT_EQ(s.un[s.at(j, k)], -s.un[s.at(j, 9 - k)]) << j << "," << k;
  }
  EXPECT_GT(s.un[s.at(5, 5)], 0.0F);
  EXPECT_LT(s.un[s.at(5, 4)], 0.0F);
}

TEST(Sw2d, SymmetryPreservedOverManySteps) {
  for (int n : {12, 15}) {
    ModelParams p = sftest::grid(n, n, 300);
    State s = sw2d::initial_state(p);
    for (int t = 0; t < 300; ++t) {
      sw2d::reference_step(s, p);
      ASSERT_TRUE(mirror_x(s.eta, s) && mirror_y(s.eta, s) && transposed(s.eta, s)) << "n=" << n << " t=" << t;
    }
  }
}

TEST(Sw2d, ShapiroIdentityAndUniform) {
  State s = random_wet(8, 3);
  s.etan = s.eta;
  sw2d::shapiro_step(s, 0.0F);
  for (int j = 1; j <= 8; ++j) {
    for (int k = 1; k <= 8; ++k) EXPECT_EQ(s.etaf[s.at(j, k)], s.etan[s.at(j, k)]);
  }
  std::fill(s.etan.begin(), s.etan.end(), 0.375F);
  sw2d::shapiro_step(s, 0.05F);
  for (int j = 1; j <= 8; ++j) {
    for (int k = 1; k <= 8; ++k) EXPECT_EQ(s.etaf[s.at(j, k)], 0.375F);
  }
}

TEST(Sw2d, ShapiroCheckerboard) {
  State s = sw2d::initial_state(rest(8, 1));
  std::fill(s.wet.begin(), s.wet.end(), 1);
  for (int j = 0; j <= 9; ++j) {
    for (int k = 0; k <= 9; ++k) s.etan[s.at(j, k)] = (j + k) % 2 ? -1.0F : 1.0F;
  }
  sw2d::shapiro_step(s, 0.05F);
  for (int j = 1; j <= 8; ++j) {
    for (int k = 1; k <= 8; ++k) {
      const float expect = (j + k) % 2 ? -0.9F : 0.9F;
      EXPECT_NEAR(s.etaf[s.at(j, k)], expect, 1e-6F) << j << "," << k;
    }
  }
}

TEST(Sw2d, ShapiroIsConvex) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<float> d(-2.0F, 2.0F);
  for (int trial = 0; trial < 20; ++trial) {
    State s = random_wet(10, static_cast<std::uint32_t>(trial));
    for (auto& e : s.etan) e = d(rng);
    for (int j = 1; j <= 10; ++j) {
      for (int k = 1; k <= 10; ++k) s.wet[s.at(j, k)] = rng() % 4 ? 1 : 0;
    }
    sw2d::shapiro_step(s, 0.05F + 0.9F * static_cast<float>(trial) / 20.0F);
    for (int j = 1; j <= 10; ++j) {
      for (int k = 1; k <= 10; ++k) {
        const float c = s.etan[s.at(j, k)];
        float lo = c;
        float hi = c;
        for (auto [dj, dk] : {std::pair{0, 1}, {0, -1}, {1, 0}, {-1, 0}}) {
          auto i = s.at(j + dj, k + dk);
          if (s.wet[i] == 1) {
            lo = std::min(lo, s.etan[i]);
            hi = std::max(hi, s.etan[i]);
          }
        }
        const float f = s.etaf[s.at(j, k)];
        EXPECT_GE(f, lo - 1e-6F);
        EXPECT_LE(f, hi + 1e-6F);
      }
    }
  }
}

TEST(Sw2d, UpdateExamples) {
  State s = sw2d::initial_state(rest(3, 1));
  auto c = s.at(2, 2);
  s.etaf[c] = 0.5F;
  s.un[c] = 0.25F;
  s.vn[c] = -0.125F;
  sw2d::update_step(s, 0.1F);
  EXPECT_EQ(s.eta[c], 0.5F);
  EXPECT_EQ(s.h[c], 10.5F);
  EXPECT_EQ(s.u[c], 0.25F);
  EXPECT_EQ(s.v[c], -0.125F);
  EXPECT_EQ(s.wet[c], 1);

  s.etaf[c] = -10.05F;
  s.un[c] = 0.25F;
  sw2d::update_step(s, 0.1F);
  EXPECT_LT(s.h[c], 0.1F);
  EXPECT_EQ(s.wet[c], 0);
  EXPECT_EQ(s.u[c], 0.0F);
  EXPECT_EQ(s.v[c], 0.0F);
}

TEST(Sw2d, DynamicsConservesMass) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    State s = random_wet(16, seed);
    sw2d::dynamics_step(s, rest(16, 1));
    const double before = interior_sum(s.eta, s);
    const double after = interior_sum(s.etan, s);
    EXPECT_LE(std::abs(after - before) / before, 1e-6) << seed;
  }
}

TEST(Sw2d, VolumeDriftAt64) {
  ModelParams p = sftest::grid(64, 64, 1000);
  State s = sw2d::initial_state(p);
  const double v0 = s.volume();
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    sw2d::dynamics_step(s, p);
    worst = std::max(worst, std::abs(interior_sum(s.etan, s) - v0) / v0);
    sw2d::shapiro_step(s, p.eps);
    sw2d::update_step(s, p.hmin);
  }
  EXPECT_LE(worst, 1e-4);
  sw2d::check_finite(s);
}

TEST(Sw2d, NonFiniteIsReported) {
  State s = sw2d::initial_state(rest(4, 1));
  s.eta[s.at(2, 2)] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(sw2d::check_finite(s), NonFiniteField);
}

TEST(Sw2d, HostRoundTrip) {
  State s = sw2d::run_reference(sftest::grid(6, 4, 3), 3);
  EXPECT_EQ(sw2d::from_host(sw2d::to_host(s)), s);
  EXPECT_EQ(sw2d::to_host(s).at("eta").shape, (Shape{{0, 0}, {5, 7}}));
}

TEST(Sw2d, FieldFilesRoundTrip) {
  auto dir = scratch("fields");
  State s = sw2d::run_reference(sftest::grid(5, 7, 2), 2);
  auto host = sw2d::to_host(s);
  for (const auto& n : sw2d::live_fields()) {
    sw2d::write_field((dir / n).string(), n, host.at(n));
    EXPECT_EQ(sw2d::read_field((dir / n).string()), host.at(n)) << n;
  }
  EXPECT_THROW(sw2d::read_field((dir / "nope").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST(Sw2d, GoldenFieldsAt32) {
  State s = sw2d::run_reference(ModelParams{}, 100);
  auto host = sw2d::to_host(s);
  const std::string dir = sftest::corpus_dir() + "/sw2d/golden/fields_32x32_nt100/";
  for (const auto& n : sw2d::live_fields()) EXPECT_EQ(sw2d::read_field(dir + n), host.at(n)) << n;
  EXPECT_NEAR(s.volume(), 64.0, 1e-3);
}
