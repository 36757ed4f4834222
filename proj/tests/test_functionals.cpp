#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vmb/errors.hpp"
#include "vmb/functionals.hpp"
#include "vmb/macromicro.hpp"

using namespace vmb;

namespace {
constexpr double kPi = std::numbers::pi;

struct Setup {
  double L = 2 * kPi;
  SpatialGrid sg = build_spatial_grid(2, 8, L);
  SpectralOps ops{sg};
  VelocityGrid vg = build_velocity_grid(8, 6.0);
  SobolevParams params = [] {
    SobolevParams p;
    p.N = 2;
    p.N0 = 1;
    return p;
  }();

  SpeciesPair random_state(std::uint64_t seed, double amp = 1e-2) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    SpeciesPair f(sg.size(), vg.size());
    // Band-limited in x: a few low modes with random velocity profiles.
    for (int mode = 0; mode < 3; ++mode) {
      std::vector<double> h(2 * vg.size());
      for (std::size_t i = 0; i < vg.size(); ++i) {
        h[i] = amp * N(rng) * vg.sqrt_maxwellian[i];
        h[vg.size() + i] = amp * N(rng) * vg.sqrt_maxwellian[i];
      }
      for (std::size_t x = 0; x < sg.size(); ++x) {
        const auto p = sg.position(x);
        const double c = std::cos(mode * p[0] + (mode == 2 ? p[1] : 0.0) + 0.3 * mode);
        for (int s = 0; s < 2; ++s)
          for (std::size_t i = 0; i < vg.size(); ++i) f.at(s, x, i) += c * h[s * vg.size() + i];
      }
    }
    return f;
  }
  EMState random_fields(std::uint64_t seed, double amp = 1e-2) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    EMState em(sg.size());
    for (int a = 0; a < 3; ++a) {
      const double c1 = N(rng), c2 = N(rng);
      for (std::size_t x = 0; x < sg.size(); ++x) {
        const auto p = sg.position(x);
        em.E[a][x] = amp * c1 * std::sin(p[0] + 2 * p[1]);
        em.B[a][x] = amp * c2 * std::cos(p[1]);
      }
    }
    return em;
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
}  // namespace

TEST_CASE("multi-indices and velocity derivatives of any order") {
  CHECK(multi_indices(2, 3).size() == 6);
  CHECK(multi_indices(2, 2).size() == 3);
  CHECK(multi_indices(0, 2).size() == 1);
  CHECK(multi_indices(-1, 3).empty());

  const auto vg = build_velocity_grid(8, 6.0);
  std::vector<double> cube(vg.size());
  for (std::size_t i = 0; i < vg.size(); ++i) cube[i] = std::pow(vg.nodes[i][0], 3);
  const auto d3 = velocity_derivative_any(cube, vg, {3, 0, 0});
  const int n = vg.points_per_axis;
  for (std::size_t i = 0; i < vg.size(); ++i) {
    const int pos = static_cast<int>(i) / (n * n);
    if (pos >= 2 && pos <= n - 3) CHECK(d3[i] == doctest::Approx(6.0).epsilon(1e-10));
  }
}

TEST_CASE("sigma table and weight chain") {
  const SigmaTable s(4, 0.2);
  CHECK(s(4, 0) == doctest::Approx(0.6));
  CHECK(s(3, 0) == 0.0);
  CHECK(s(3, 2) == doctest::Approx(1.2));
  CHECK(s(4, 3) == doctest::Approx(2.4));
  CHECK_THROWS_AS(s(2, 3), ConfigError);
  CHECK_THROWS_AS(SigmaTable(0, 0.1), ConfigError);

  const auto c = minimal_chain(4, 1.0, s);
  CHECK(c.l1 == doctest::Approx(5.0));
  CHECK(c.ell_tilde == doctest::Approx(1.5 * s(3, 3)));
  CHECK(c.l1 < c.ell1);
  CHECK(c.ell1 < c.ell_bar0);
  CHECK(c.ell_bar0 < c.l0);
  CHECK(c.l0 < c.ell0);
  CHECK(c.ell0 < c.lH);

  SobolevParams p;
  p.N0 = 5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("weights decay in time and reduce to one") {
  const auto vg = build_velocity_grid(8, 6.0);
  for (WeightFamily fam : {WeightFamily::NoncutoffW, WeightFamily::CutoffBar, WeightFamily::CutoffTilde}) {
    WeightSpec w{fam, 3.0, 0.02, 0.25, 1, 1, 0.0};
    const auto w0 = evaluate_weight(w, vg);
    w.t = 2.0;
    const auto w2 = evaluate_weight(w, vg);
    for (std::size_t i = 0; i < vg.size(); ++i) CHECK(w2[i] <= w0[i]);
  }
  // Unweighted limit: exponent zero and t large.
  Setup s;
  const auto f = s.random_state(1);
  const double plain = mixed_sobolev_norm(f, 0, 0, s.vg, s.ops, std::nullopt, false);
  WeightSpec w{WeightFamily::NoncutoffW, 0.0, 0.01, 0.25, 0, 0, 1e12};
  const double weighted = mixed_sobolev_norm(f, 0, 0, s.vg, s.ops, w, false);
  const double bmax = std::sqrt(1.0 + 3.0 * 5.25 * 5.25);
  CHECK(weighted >= plain);
  CHECK(weighted / plain - 1.0 <= std::exp(2.0 * w.q * bmax / std::pow(1.0 + w.t, w.vartheta)) - 1.0);
  CHECK_THROWS_AS(evaluate_weight({WeightFamily::CutoffBar, 1.0, 0.0, 0.25, 0, 0, 0.0}, vg), ConfigError);
}

TEST_CASE("mixed Sobolev norm: single-mode Parseval") {
  Setup s;
  const double L = s.L;
  for (int k : {1, 3}) {
    SpeciesPair f(s.sg.size(), s.vg.size());
    double hv = 0.0;
    for (std::size_t i = 0; i < s.vg.size(); ++i) {
      const double h = (1.0 + s.vg.nodes[i][1]) * s.vg.sqrt_maxwellian[i];
      hv += s.vg.quad_weights[i] * 2.0 * h * h;
      for (std::size_t x = 0; x < s.sg.size(); ++x) {
        const double c = std::cos(2 * kPi * k * s.sg.position(x)[0] / L);
        f.at(0, x, i) = c * h;
        f.at(1, x, i) = c * h;
      }
    }
    const double xi = 2 * kPi * k / L;
    const double expect = (1.0 + xi * xi) * 0.5 * s.sg.volume() * hv;
    CHECK(mixed_sobolev_norm(f, 1, 0, s.vg, s.ops, std::nullopt, false) == doctest::Approx(expect).epsilon(1e-12));
  }
  SpeciesPair zero(s.sg.size(), s.vg.size());
  CHECK(mixed_sobolev_norm(zero, 2, 1, s.vg, s.ops, std::nullopt, true) == 0.0);
  CHECK_THROWS_AS(mixed_sobolev_norm(zero, 5, 0, s.vg, s.ops, std::nullopt, false), GridError);
}

TEST_CASE("E_N and D_N") {
  Setup s;
  const EMState none(s.sg.size());
  SpeciesPair zero(s.sg.size(), s.vg.size());
  const auto [e0, d0] = energy_EN_DN(zero, none, 0.2, s.vg, s.ops, s.params);
  CHECK(e0 == 0.0);
  CHECK(d0 == 0.0);

  // Purely microscopic f, no fields: D_N is the eps^-2 term alone.
  const auto micro = micro_part(s.random_state(2), s.vg);
  const auto [ea, da] = energy_EN_DN(micro, none, 0.2, s.vg, s.ops, s.params);
  const auto [eb, db] = energy_EN_DN(micro, none, 0.1, s.vg, s.ops, s.params);
  CHECK(ea == eb);
  CHECK(rel(db, 4.0 * da) <= 1e-12);

  // Pointwise macroscopic f: no microscopic dissipation, D_N independent of eps.
  const auto macro = project_P(s.random_state(3), s.vg);
  const auto pa = energy_EN_DN(macro, none, 0.2, s.vg, s.ops, s.params);
  const auto pb = energy_EN_DN(macro, none, 0.05, s.vg, s.ops, s.params);
  CHECK(rel(pa.second, pb.second) <= 1e-10);
  CHECK(pa.second > 0.0);
}

TEST_CASE("Lambda norm") {
  Setup s;
  const double L = s.L, a = 0.3, varrho = 1.2;
  std::vector<double> single(s.sg.size()), two(s.sg.size()), other(s.sg.size()), constant(s.sg.size(), 4.0);
  for (std::size_t x = 0; x < s.sg.size(); ++x) {
    const auto p = s.sg.position(x);
    single[x] = a * std::cos(2 * kPi * 2 * p[0] / L);
    other[x] = 0.5 * std::sin(2 * kPi * (p[0] + 3 * p[1]) / L);
    two[x] = single[x] + other[x];
  }
  const double xi = 2.0 / L;
  CHECK(lambda_norm(single, varrho, s.ops) == doctest::Approx(a * std::pow(xi, -varrho) * std::sqrt(0.5 * s.sg.volume())).epsilon(1e-12));
  CHECK(lambda_norm(constant, varrho, s.ops) == 0.0);
  const double l1 = lambda_norm(single, varrho, s.ops), l2 = lambda_norm(other, varrho, s.ops);
  CHECK(lambda_norm(two, varrho, s.ops) == doctest::Approx(std::hypot(l1, l2)).epsilon(1e-12));
}

TEST_CASE("weighted families") {
  Setup s;
  SpeciesPair zero(s.sg.size(), s.vg.size());
  const auto zr = energy_report(zero, EMState(s.sg.size()), 0.5, 0.2, s.vg, s.ops, s.params);
  for (const auto& [k, v] : zr.weighted) CHECK_MESSAGE(v == 0.0, k);
  CHECK(zr.e_N == 0.0);

  // A pure macroscopic single-mode state: in E_{N,l} only the top full-f block survives.
  SpeciesPair f(s.sg.size(), s.vg.size());
  std::vector<double> h(s.vg.size());
  for (std::size_t i = 0; i < s.vg.size(); ++i) h[i] = (0.2 + 0.1 * s.vg.nodes[i][0]) * s.vg.sqrt_maxwellian[i];
  for (std::size_t x = 0; x < s.sg.size(); ++x) {
    const double c = std::cos(s.sg.position(x)[0]);
    for (std::size_t i = 0; i < s.vg.size(); ++i) f.at(0, x, i) = f.at(1, x, i) = c * h[i];
  }
  const double eps = 0.3, t = 0.5;
  const PhaseSpaceProfiles prof(f, EMState(s.sg.size()), s.vg, s.ops, s.params.N);
  const double ell = s.params.ell_value();
  const auto [E, D] = noncutoff_family(prof, s.vg, s.params.N, ell, eps, t, s.params);
  WeightSpec ws{WeightFamily::NoncutoffW, ell, s.params.q, s.params.vartheta, s.params.N, 0, t};
  const auto W = evaluate_weight(ws, s.vg);
  double vsum = 0.0;
  for (std::size_t i = 0; i < s.vg.size(); ++i) vsum += s.vg.quad_weights[i] * W[i] * W[i] * 2.0 * h[i] * h[i];
  const double P = std::pow(1.0 + t, -0.5 * (1.0 + s.params.epsilon0));
  CHECK(rel(E, P * eps * eps * 0.5 * s.sg.volume() * vsum) <= 1e-10);
  CHECK(D > 0.0);

  // Time prefactors of the tilde blocks follow sigma when the exponential weight is switched off.
  auto p2 = s.params;
  p2.q = 1e-14;
  const SigmaTable sigma(p2.N, p2.epsilon0);
  const auto g = s.random_state(5);
  const PhaseSpaceProfiles pg(g, EMState(s.sg.size()), s.vg, s.ops, p2.N);
  for (int n = 1; n <= p2.N; ++n)
    for (int j = 1; j <= n; ++j) {
      auto inc = [&](double tt) {
        return cutoff_tilde_block(pg, s.vg, n, j, 3.0, eps, tt, p2, sigma).first -
               cutoff_tilde_block(pg, s.vg, n, j - 1, 3.0, eps, tt, p2, sigma).first;
      };
      CHECK(rel(inc(1.0) / inc(0.0), std::pow(2.0, -sigma(n, j))) <= 1e-9);
    }
}

TEST_CASE("report homogeneity and k-monotonicity") {
  Setup s;
  const auto f = s.random_state(7);
  const auto em = s.random_fields(8);
  auto scaled_f = f;
  scaled_f *= 3.0;
  EMState scaled_em = em;
  for (int a = 0; a < 3; ++a) {
    for (double& x : scaled_em.E[a]) x *= 3.0;
    for (double& x : scaled_em.B[a]) x *= 3.0;
  }
  const auto r1 = energy_report(f, em, 0.4, 0.2, s.vg, s.ops, s.params);
  const auto r3 = energy_report(scaled_f, scaled_em, 0.4, 0.2, s.vg, s.ops, s.params);
  CHECK(rel(r3.e_N, 9.0 * r1.e_N) <= 1e-12);
  CHECK(rel(r3.d_N, 9.0 * r1.d_N) <= 1e-12);
  for (const auto& [k, v] : r1.weighted) {
    // The composite forms carry the Lambda norms unsquared, so they are not homogeneous.
    if (k.starts_with("lyap_main_thm2")) continue;
    CHECK_MESSAGE(rel(r3.weighted.at(k), 9.0 * v) <= 1e-12, k);
  }
  CHECK(rel(r3.lambda_f, 3.0 * r1.lambda_f) <= 1e-12);
  CHECK(rel(r3.lambda_E, 3.0 * r1.lambda_E) <= 1e-12);
  for (std::size_t k = 0; k + 1 < r1.e_k_to_N0.size(); ++k) {
    CHECK(r1.e_k_to_N0[k + 1] <= r1.e_k_to_N0[k]);
    CHECK(r1.d_k_to_N0[k + 1] <= r1.d_k_to_N0[k]);
  }
  CHECK_THROWS_AS(PhaseSpaceProfiles(f, em, s.vg, s.ops, 5), GridError);
}

TEST_CASE("Lyapunov audit") {
  std::vector<double> t, E, D;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(0.02 * i);
    E.push_back(std::exp(-2.0 * t.back()));
    D.push_back(std::exp(-2.0 * t.back()));
  }
  const auto ok = lyapunov_audit(t, E, D, 1.0, 1e-6, "synthetic");
  CHECK(ok.pass);
  CHECK(ok.max_margin <= 0.0);
  CHECK(ok.c_fit == doctest::Approx(2.0).epsilon(2e-2));
  CHECK(ok.margin.size() == 50);

  // Equilibrium: nothing moves, nothing dissipates.
  std::vector<double> zeros(t.size(), 0.0);
  const auto eq = lyapunov_audit(t, zeros, zeros, 1.0, 1e-6);
  CHECK(eq.pass);
  for (double m : eq.margin) CHECK(m == 0.0);
  // A frozen functional with positive dissipation violates the inequality by D.
  std::vector<double> flat(t.size(), 1.0), dd(t.size(), 0.5);
  const auto frozen = lyapunov_audit(t, flat, dd, 1.0, 1e-6);
  CHECK_FALSE(frozen.pass);
  for (double m : frozen.margin) CHECK(m == doctest::Approx(0.5));

  // Reversed time injects energy.
  std::vector<double> rev(E.rbegin(), E.rend()), drev(D.rbegin(), D.rend());
  const auto bad = lyapunov_audit(t, rev, drev, 1.0, 1e-6);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_margin > 0.0);

  std::vector<double> skew{0.0, 0.1, 0.3};
  CHECK_THROWS(lyapunov_audit(skew, std::span(E).first(3), std::span(D).first(3), 1.0, 1e-6));
  CHECK_THROWS(lyapunov_audit(std::span(t).first(1), std::span(E).first(1), std::span(D).first(1), 1.0, 1e-6));
}

TEST_CASE("decay fit") {
  std::vector<double> t, power, expo;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    power.push_back(3.0 * std::pow(1.0 + t.back(), -2.0));
    expo.push_back(std::exp(-t.back()));
  }
  const auto p = decay_fit(t, power, 1, 1.0);
  CHECK(p.exponent == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(p.target == -2.0);
  CHECK(p.one_sided_pass);
  const auto e = decay_fit(t, expo, 0, 1.0);
  CHECK(e.exponent < -1.0);
  CHECK(e.one_sided_pass);
  std::vector<double> grow;
  for (double x : t) grow.push_back(1.0 + x);
  CHECK_FALSE(decay_fit(t, grow, 0, 1.0).one_sided_pass);
  CHECK_FALSE(p.report.empty());
}
