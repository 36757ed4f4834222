#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vmb/errors.hpp"
#include "vmb/fields.hpp"
#include "vmb/macromicro.hpp"
#include "vmb/vmb_solver.hpp"

using namespace vmb;

namespace {
constexpr double kPi = std::numbers::pi;

struct Setup {
  SpatialGrid sg = build_spatial_grid(2, 16, 2 * kPi);
  SpectralOps ops{sg};
};

double mode_energy(const EMState& em, const SpectralOps& ops, std::size_t m) {
  double e = 0.0;
  std::vector<cplx> hat(ops.size());
  for (int a = 0; a < 3; ++a) {
    ops.forward(em.E[a], hat);
    e += std::norm(hat[m]);
    ops.forward(em.B[a], hat);
    e += std::norm(hat[m]);
  }
  return e;
}

std::size_t mode_index(const SpatialGrid& sg, std::array<int, 3> k) {
  for (std::size_t m = 0; m < sg.size(); ++m)
    if (sg.wavenumbers[m] == k) return m;
  throw std::logic_error("mode not on grid");
}
}  // namespace

TEST_CASE("vacuum plane waves keep their mode energy") {
  Setup s;
  EMState em(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    em.E[1][i] = std::cos(x[0]) + 0.3 * std::sin(2 * x[0] + 3 * x[1]);
    em.B[2][i] = std::cos(x[0]);
    em.E[2][i] = 0.2 * std::cos(x[1]);
  }
  const auto zero = zero_vector_field(s.sg.size());
  const std::size_t m1 = mode_index(s.sg, {1, 0, 0}), m2 = mode_index(s.sg, {2, 3, 0}), m3 = mode_index(s.sg, {0, 1, 0});
  const double e1 = mode_energy(em, s.ops, m1), e2 = mode_energy(em, s.ops, m2), e3 = mode_energy(em, s.ops, m3);
  const double total = field_energy(em, s.ops);
  for (int n = 0; n < 100; ++n) em = maxwell_step(em, zero, 0.037, s.ops);
  CHECK(mode_energy(em, s.ops, m1) == doctest::Approx(e1).epsilon(1e-12));
  CHECK(mode_energy(em, s.ops, m2) == doctest::Approx(e2).epsilon(1e-12));
  CHECK(mode_energy(em, s.ops, m3) == doctest::Approx(e3).epsilon(1e-12));
  CHECK(field_energy(em, s.ops) == doctest::Approx(total).epsilon(1e-12));
  CHECK(em.t == doctest::Approx(3.7));

  // E = (0, cos x1, 0), B = (0, 0, cos x1) is a travelling wave: both
  // components follow cos(x1 - t).
  EMState wave(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    wave.E[1][i] = std::cos(x[0]);
    wave.B[2][i] = std::cos(x[0]);
  }
  for (int n = 0; n < 10; ++n) wave = maxwell_step(wave, zero, 0.1, s.ops);
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    CHECK(wave.E[1][i] == doctest::Approx(std::cos(x[0] - 1.0)).scale(1.0).epsilon(1e-12));
    CHECK(wave.B[2][i] == doctest::Approx(std::cos(x[0] - 1.0)).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("constant fields and currents") {
  Setup s;
  EMState em(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    em.E[0][i] = 0.5;
    em.B[2][i] = -1.25;
  }
  const auto zero = zero_vector_field(s.sg.size());
  const auto same = maxwell_step(em, zero, 0.1, s.ops);
  for (int a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < s.sg.size(); ++i) {
      CHECK(same.E[a][i] == doctest::Approx(em.E[a][i]).scale(1.0).epsilon(1e-14));
      CHECK(same.B[a][i] == doctest::Approx(em.B[a][i]).scale(1.0).epsilon(1e-14));
    }

  EMState start(s.sg.size());
  VectorField j0 = zero_vector_field(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    j0[0][i] = 0.3;
    j0[1][i] = -0.7;
  }
  for (int n = 0; n < 25; ++n) start = maxwell_step(start, j0, 0.04, s.ops);
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    CHECK(start.E[0][i] == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(start.E[1][i] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(std::abs(start.B[2][i]) <= 1e-14);
  }
  CHECK_THROWS_AS(maxwell_step(em, zero, 0.0, s.ops), ConfigError);
}

TEST_CASE("Gauss residuals") {
  Setup s;
  const auto vgrid = build_velocity_grid(4, 6.0);
  MacroFields macro;
  macro.rho.assign(s.sg.size(), 0.0);
  macro.theta.assign(s.sg.size(), 0.0);
  macro.n.resize(s.sg.size());
  macro.u = zero_vector_field(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    macro.n[i] = 0.1 * std::cos(x[0] - 2 * x[1]);
  }
  EMState em(s.sg.size());
  em.E = gauss_field(macro.n, s.ops);
  // B = curl A for a random band-limited A.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  VectorField A = zero_vector_field(s.sg.size());
  for (int a = 0; a < 3; ++a) {
    const double c = U(rng), d = U(rng);
    for (std::size_t i = 0; i < s.sg.size(); ++i) {
      const auto x = s.sg.position(i);
      A[a][i] = c * std::sin(x[0] + a * x[1]) + d * std::cos(3 * x[1]);
    }
  }
  em.B = s.ops.curl(A);
  const auto state = well_prepared_init(macro, em, vgrid, s.ops);
  const auto [ge, gb] = gauss_residuals(state.em, state.f, vgrid, s.ops);
  CHECK(ge <= 1e-12);
  CHECK(gb <= 1e-12);
}

TEST_CASE("force terms") {
  const auto vgrid = build_velocity_grid(8, 6.0);
  const double eps = 0.25;
  SpeciesPair f(1, vgrid.size());
  EMState em(1);
  CHECK(force_terms(f, em, eps, vgrid).values()[5] == 0.0);

  // Only the source survives when f = 0.
  em.E[0][0] = 1.0;
  const auto src = force_terms(f, em, eps, vgrid);
  for (std::size_t i = 0; i < vgrid.size(); ++i) {
    const double expect = vgrid.nodes[i][0] * vgrid.sqrt_maxwellian[i] / eps;
    CHECK(src.at(0, 0, i) == doctest::Approx(expect).scale(1.0).epsilon(1e-14));
    CHECK(src.at(1, 0, i) == doctest::Approx(-expect).scale(1.0).epsilon(1e-14));
  }

  // Pure magnetic rotation of f = v1 sqrt(M) q2.
  em = EMState(1);
  em.B[2][0] = 1.0;
  for (int s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < vgrid.size(); ++i) f.at(s, 0, i) = vgrid.nodes[i][0] * vgrid.sqrt_maxwellian[i];
  const auto rot = force_terms(f, em, eps, vgrid);
  // Centred-difference oracle on the analytic profile at interior nodes:
  // -(q/eps)(v2 d1 f - v1 d2 f).
  const double h = vgrid.spacing;
  auto prof = [](const Vec3& v) { return v[0] * std::exp(-0.25 * norm2(v)) / std::pow(2 * kPi, 0.75); };
  const int n = vgrid.points_per_axis;
  double worst = 0.0, worst_continuum = 0.0;
  for (int a = 1; a < n - 1; ++a)
    for (int b = 1; b < n - 1; ++b)
      for (int c = 0; c < n; ++c) {
        const std::size_t i = vgrid.index(a, b, c);
        const Vec3 v = vgrid.nodes[i];
        auto shift = [&](int axis, double d) {
          Vec3 w = v;
          w[axis] += d;
          return w;
        };
        const double d1 = (prof(shift(0, h)) - prof(shift(0, -h))) / (2 * h);
        const double d2 = (prof(shift(1, h)) - prof(shift(1, -h))) / (2 * h);
        const double oracle = -(v[1] * d1 - v[0] * d2) / eps;
        worst = std::max(worst, std::abs(rot.at(0, 0, i) - oracle));
        worst = std::max(worst, std::abs(rot.at(1, 0, i) + oracle));
        if (norm2(v) < 4.0)
          worst_continuum = std::max(worst_continuum, std::abs(rot.at(0, 0, i) + v[1] * vgrid.sqrt_maxwellian[i] / eps));
      }
  CHECK(worst <= 1e-12);
  // Continuum profile -(q/eps) v2 sqrt(M), reached up to the stencil error.
  CHECK(worst_continuum <= 0.3 / eps);

  // Net charge increment vanishes for arbitrary inputs.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto& x : f.values()) x = N(rng) * 0.1;
  em.E[1][0] = 0.4;
  em.B[0][0] = -0.6;
  const auto inc = force_terms(f, em, eps, vgrid);
  for (int s = 0; s < 2; ++s) {
    double mass = 0.0;
    for (std::size_t i = 0; i < vgrid.size(); ++i) mass += vgrid.quad_weights[i] * vgrid.sqrt_maxwellian[i] * inc.at(s, 0, i);
    CHECK(std::abs(mass) <= 1e-13);
  }
  CHECK_THROWS_AS(force_terms(f, em, 0.0, vgrid), ConfigError);
}

TEST_CASE("transverse part") {
  Setup s;
  VectorField v = zero_vector_field(s.sg.size());
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    v[0][i] = 0.5 + std::cos(x[0]) + std::sin(x[1]);
    v[1][i] = std::cos(x[1]);
  }
  const auto t = transverse_part(v, s.ops);
  for (double d : s.ops.divergence(t)) CHECK(std::abs(d) <= 1e-12);
  for (std::size_t i = 0; i < s.sg.size(); ++i) {
    const auto x = s.sg.position(i);
    CHECK(t[0][i] == doctest::Approx(0.5 + std::sin(x[1])).scale(1.0).epsilon(1e-12));
    CHECK(std::abs(t[1][i]) <= 1e-12);
  }
}
