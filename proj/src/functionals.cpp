#include "vmb/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "vmb/errors.hpp"
#include "vmb/macromicro.hpp"

namespace vmb {

namespace {

constexpr MultiIndex kZero{0, 0, 0};

MultiIndex plus_axis(MultiIndex a, int axis) {
  ++a[axis];
  return a;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double multinomial(const MultiIndex& a) {
  return factorial(order(a)) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]));
}

// h^3 sum_v W(v)^2 <v>^power (<v>^gamma if nu) profile(v)
double weighted_sum(std::span<const double> profile, const VelocityGrid& vgrid, const std::vector<double>* W,
                    double power, bool nu, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < vgrid.size(); ++i) {
    double w = W ? (*W)[i] * (*W)[i] : 1.0;
    if (power != 0.0) w *= std::pow(vgrid.bracket_v[i], power);
    if (nu) w *= std::pow(vgrid.bracket_v[i], gamma);
    s += w * profile[i];
  }
  return s * vgrid.quad_weights[0];
}

struct Weights {
  const VelocityGrid& vgrid;
  WeightSpec base;
  std::map<std::pair<int, int>, std::vector<double>> cache;
  const std::vector<double>& operator()(int a, int b) {
    auto it = cache.find({a, b});
    if (it != cache.end()) return it->second;
    WeightSpec s = base;
    s.alpha = a;
    s.beta = b;
    return cache.emplace(std::make_pair(a, b), evaluate_weight(s, vgrid)).first->second;
  }
};

}  // namespace

std::vector<double> evaluate_weight(const WeightSpec& spec, const VelocityGrid& vgrid) {
  if (!(spec.q > 0.0) || !(spec.vartheta > 0.0)) throw ConfigError("weight: q and vartheta must be positive");
  if (spec.alpha < 0 || spec.beta < 0 || spec.t < 0.0) throw ConfigError("weight: negative order or time");
  const double decay = std::pow(1.0 + spec.t, spec.vartheta);
  std::vector<double> w(vgrid.size());
  for (std::size_t i = 0; i < vgrid.size(); ++i) {
    const double b = vgrid.bracket_v[i];
    switch (spec.family) {
      case WeightFamily::NoncutoffW:
        w[i] = std::exp(spec.q * b / decay) * std::pow(b, 4.0 * (spec.ell - spec.alpha - spec.beta));
        break;
      case WeightFamily::CutoffBar:
        w[i] = std::pow(b, spec.ell - spec.alpha - 2.0 * spec.beta) * std::exp(spec.q * b * b / decay);
        break;
      case WeightFamily::CutoffTilde:
        w[i] = std::pow(b, spec.ell - spec.alpha - 0.5 * spec.beta) * std::exp(spec.q * b * b / decay);
        break;
    }
    if (!std::isfinite(w[i])) throw ConfigError("weight is not finite on the velocity grid");
  }
  return w;
}

SigmaTable::SigmaTable(int N, double epsilon0) : N_(N), step_(0.5 * (1.0 + epsilon0)) {
  if (N < 1) throw ConfigError("sigma table: N must be positive");
  if (!(epsilon0 > 0.0)) throw ConfigError("sigma table: epsilon0 must be positive");
}

double SigmaTable::operator()(int n, int j) const {
  if (n < 0 || n > N_ || j < 0 || j > n) throw ConfigError(fmt::format("sigma table: ({}, {}) out of range", n, j));
  return (n == N_ ? step_ : 0.0) + j * step_;
}

WeightChain minimal_chain(int N, double l_bar, const SigmaTable& sigma) {
  WeightChain c;
  c.l1 = N + l_bar;
  c.ell_tilde = 1.5 * sigma(N - 1, N - 1);
  c.ell1 = c.l1 + c.ell_tilde + 0.5;
  c.ell_bar0 = c.ell1 + 1.5 * N;
  c.l0 = c.ell_bar0 + 2.5;
  c.ell0 = c.l0 + c.ell_tilde + 0.5;
  c.lH = c.ell0 + N;
  return c;
}

void SobolevParams::validate() const {
  if (N < 1 || N0 < 1 || N0 > N) throw ConfigError("functionals: need 1 <= N0 <= N");
  if (!(q > 0.0) || !(vartheta > 0.0) || !(epsilon0 > 0.0)) throw ConfigError("functionals: q, vartheta, epsilon0 must be positive");
  if (!(varrho > 0.0)) throw ConfigError("functionals: varrho must be positive");
}

std::vector<MultiIndex> multi_indices(int k, int axes) {
  std::vector<MultiIndex> out;
  if (k < 0) return out;
  for (int a = 0; a <= k; ++a)
    for (int b = 0; b <= k - a; ++b) {
      const int c = k - a - b;
      const MultiIndex m{a, b, c};
      bool ok = true;
      for (int ax = axes; ax < 3; ++ax) ok = ok && m[ax] == 0;
      if (ok) out.push_back(m);
    }
  return out;
}

std::vector<double> velocity_derivative_any(std::span<const double> g, const VelocityGrid& vgrid, const MultiIndex& beta) {
  std::vector<double> cur(g.begin(), g.end());
  MultiIndex rem = beta;
  while (order(rem) > 0) {
    MultiIndex piece{};
    for (int a = 0; a < 3; ++a) piece[a] = std::min(rem[a], 2);
    cur = velocity_derivative(cur, vgrid, piece);
    for (int a = 0; a < 3; ++a) rem[a] -= piece[a];
  }
  return cur;
}

DerivativeProfiles::DerivativeProfiles(const SpeciesPair& g, const VelocityGrid& vgrid, const SpectralOps& ops,
                                       int max_order, int beta_max, std::vector<double>* mode_energy)
    : max_order_(max_order), beta_max_(beta_max) {
  const std::size_t nx = ops.size(), nv = vgrid.size(), count = 2 * nv;
  if (g.spatial_nodes() != nx || g.velocity_nodes() != nv) throw ShapeError("profiles: state does not match the grids");
  const int dim = ops.grid().dim;
  const double scale = ops.grid().volume() / (static_cast<double>(nx) * static_cast<double>(nx));
  // |symbol|^2 per spatial multi-index and mode.
  std::map<MultiIndex, std::vector<double>> sym2;
  for (int k = 0; k <= max_order; ++k)
    for (const auto& a : multi_indices(k, dim)) {
      auto& v = sym2[a];
      v.resize(nx);
      for (std::size_t m = 0; m < nx; ++m) v[m] = std::norm(ops.derivative_symbol(m, a));
    }
  if (mode_energy) mode_energy->assign(nx, 0.0);
  std::vector<cplx> buf(nx * count);
  for (int kb = 0; kb <= std::min(beta_max, max_order); ++kb)
    for (const auto& b : multi_indices(kb, 3)) {
#pragma omp parallel for schedule(static)
      for (long l = 0; l < static_cast<long>(nx); ++l) {
        const auto x = static_cast<std::size_t>(l);
        for (int s = 0; s < 2; ++s) {
          cplx* row = buf.data() + x * count + static_cast<std::size_t>(s) * nv;
          if (kb == 0) {
            const auto src = g.slice(s, x);
            for (std::size_t i = 0; i < nv; ++i) row[i] = src[i];
          } else {
            const auto d = velocity_derivative_any(g.slice(s, x), vgrid, b);
            for (std::size_t i = 0; i < nv; ++i) row[i] = d[i];
          }
        }
      }
      ops.forward_batch(buf, count);
      std::vector<MultiIndex> alphas;
      for (int ka = 0; ka + kb <= max_order; ++ka)
        for (const auto& a : multi_indices(ka, dim)) alphas.push_back(a);
      std::vector<std::vector<double>> prof(alphas.size(), std::vector<double>(nv, 0.0));
      std::vector<double> e(nv);
      for (std::size_t m = 0; m < nx; ++m) {
        const cplx* row = buf.data() + m * count;
        double tot = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
          e[i] = std::norm(row[i]) + std::norm(row[nv + i]);
          tot += e[i];
        }
        if (kb == 0 && mode_energy) (*mode_energy)[m] = tot * scale * vgrid.quad_weights[0];
        for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
          const double c = sym2[alphas[ia]][m];
          if (c == 0.0) continue;
          auto& p = prof[ia];
          for (std::size_t i = 0; i < nv; ++i) p[i] += c * e[i];
        }
      }
      for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
        for (double& x : prof[ia]) x *= scale;
        data_[{alphas[ia], b}] = std::move(prof[ia]);
      }
    }
}

std::span<const double> DerivativeProfiles::operator()(const MultiIndex& alpha, const MultiIndex& beta) const {
  auto it = data_.find({alpha, beta});
  if (it == data_.end())
    throw ConfigError(fmt::format("derivative profile ({},{},{};{},{},{}) beyond the evaluated order {}", alpha[0], alpha[1],
                                  alpha[2], beta[0], beta[1], beta[2], max_order_));
  return it->second;
}

PhaseSpaceProfiles::PhaseSpaceProfiles(const SpeciesPair& f, const EMState& em, const VelocityGrid& vgrid,
                                       const SpectralOps& ops, int max_order)
    : max_order_(max_order), dim_(ops.grid().dim) {
  const auto& grid = ops.grid();
  if (max_order < 0) throw ConfigError("profiles: negative order");
  if (max_order > grid.points_per_axis / 2)
    throw GridError(fmt::format("derivative order {} exceeds the band limit of {} points per axis", max_order,
                                grid.points_per_axis));
  const std::size_t nx = ops.size();
  scale_ = grid.volume() / (static_cast<double>(nx) * static_cast<double>(nx));
  micro_ = DerivativeProfiles(micro_part(f, vgrid), vgrid, ops, max_order, max_order);
  full_ = DerivativeProfiles(f, vgrid, ops, max_order, 0, &mode_f_);
  macro_ = DerivativeProfiles(project_P(f, vgrid), vgrid, ops, max_order, 0);

  xi_.resize(nx);
  for (std::size_t m = 0; m < nx; ++m) {
    double s = 0.0;
    for (int a = 0; a < grid.dim; ++a) s += std::pow(grid.wavenumbers[m][a] / grid.box_length[a], 2);
    xi_[m] = std::sqrt(s);
  }
  auto field_profiles = [&](std::span<const std::vector<double>> comps, std::map<MultiIndex, double>& out,
                            std::vector<double>* modes) {
    if (modes) modes->assign(nx, 0.0);
    std::vector<cplx> h(nx);
    for (const auto& c : comps) {
      ops.forward(c, h);
      if (modes)
        for (std::size_t m = 0; m < nx; ++m) (*modes)[m] += scale_ * std::norm(h[m]);
      for (int k = 0; k <= max_order; ++k)
        for (const auto& a : multi_indices(k, grid.dim)) {
          double s = 0.0;
          for (std::size_t m = 0; m < nx; ++m) s += std::norm(ops.derivative_symbol(m, a)) * std::norm(h[m]);
          out[a] += scale_ * s;
        }
    }
  };
  field_profiles(em.E, E_, &mode_E_);
  field_profiles(em.B, B_, &mode_B_);
  const std::vector<std::vector<double>> n{charge_density(f, vgrid)};
  field_profiles(n, n_, nullptr);
}

std::span<const double> PhaseSpaceProfiles::micro(const MultiIndex& a, const MultiIndex& b) const { return micro_(a, b); }
std::span<const double> PhaseSpaceProfiles::full(const MultiIndex& a) const { return full_(a, kZero); }
std::span<const double> PhaseSpaceProfiles::macro(const MultiIndex& a) const { return macro_(a, kZero); }

namespace {
double lookup(const std::map<MultiIndex, double>& m, const MultiIndex& a) {
  auto it = m.find(a);
  if (it == m.end()) throw ConfigError("field profile beyond the evaluated order");
  return it->second;
}
double lambda_sum(const std::vector<double>& modes, const std::vector<double>& xi, double varrho) {
  if (!(varrho > 0.0)) throw ConfigError("lambda norm: varrho must be positive");
  double s = 0.0;
  for (std::size_t m = 0; m < modes.size(); ++m)
    if (xi[m] > 0.0) s += std::pow(xi[m], -2.0 * varrho) * modes[m];
  return s;
}
}  // namespace

double PhaseSpaceProfiles::field_E(const MultiIndex& a) const { return lookup(E_, a); }
double PhaseSpaceProfiles::field_B(const MultiIndex& a) const { return lookup(B_, a); }
double PhaseSpaceProfiles::charge(const MultiIndex& a) const { return lookup(n_, a); }
double PhaseSpaceProfiles::lambda_f(double r) const { return lambda_sum(mode_f_, xi_, r); }
double PhaseSpaceProfiles::lambda_E(double r) const { return lambda_sum(mode_E_, xi_, r); }
double PhaseSpaceProfiles::lambda_B(double r) const { return lambda_sum(mode_B_, xi_, r); }

double mixed_sobolev_norm(const SpeciesPair& f, int N, int beta_max, const VelocityGrid& vgrid, const SpectralOps& ops,
                          const std::optional<WeightSpec>& weight, bool nu_weight, double gamma) {
  if (N < 0 || beta_max < 0) throw ConfigError("mixed_sobolev_norm: negative order");
  if (N > ops.grid().points_per_axis / 2) throw GridError("mixed_sobolev_norm: order exceeds the band limit");
  const DerivativeProfiles prof(f, vgrid, ops, N, beta_max);
  double s = 0.0;
  for (int kb = 0; kb <= std::min(beta_max, N); ++kb)
    for (const auto& b : multi_indices(kb, 3))
      for (int ka = 0; ka + kb <= N; ++ka)
        for (const auto& a : multi_indices(ka, ops.grid().dim)) {
          std::optional<std::vector<double>> W;
          if (weight) {
            WeightSpec w = *weight;
            w.alpha = ka;
            w.beta = kb;
            W = evaluate_weight(w, vgrid);
          }
          s += weighted_sum(prof(a, b), vgrid, W ? &*W : nullptr, 0.0, nu_weight, gamma);
        }
  return s;
}

std::pair<double, double> energy_dissipation(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double eps,
                                             const SobolevParams& params) {
  if (!(eps > 0.0)) throw ConfigError("dissipation needs eps > 0");
  const int N = params.N, dim = p.dim();
  const double h3 = vgrid.quad_weights[0];
  double e = 0.0, d_micro = 0.0, d_macro = 0.0, d_E = 0.0, d_B = 0.0;
  for (int k = 0; k <= N; ++k)
    for (const auto& a : multi_indices(k, dim)) {
      const auto full = p.full(a);
      e += h3 * std::accumulate(full.begin(), full.end(), 0.0) + p.field_E(a) + p.field_B(a);
      d_micro += weighted_sum(p.micro(a, kZero), vgrid, nullptr, 0.0, true, params.gamma);
      if (k <= N - 1) d_E += p.field_E(a);
      for (int i = 0; i < dim; ++i) {
        if (k <= N - 1) {
          const auto mac = p.macro(plus_axis(a, i));
          d_macro += h3 * std::accumulate(mac.begin(), mac.end(), 0.0);
        }
        if (k <= N - 2) d_B += p.field_B(plus_axis(a, i));
      }
    }
  return {e, d_micro / (eps * eps) + d_macro + d_E + d_B};
}

std::pair<double, double> energy_EN_DN(const SpeciesPair& f, const EMState& em, double eps, const VelocityGrid& vgrid,
                                       const SpectralOps& ops, const SobolevParams& params) {
  params.validate();
  const PhaseSpaceProfiles p(f, em, vgrid, ops, params.N);
  return energy_dissipation(p, vgrid, eps, params);
}

std::pair<double, double> energy_k(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int k, double eps,
                                   const SobolevParams& params) {
  const int N0 = params.N0, dim = p.dim();
  if (k < 0 || k > N0) throw ConfigError("energy_k: k outside [0, N0]");
  const double h3 = vgrid.quad_weights[0];
  auto vsum = [&](std::span<const double> x) { return h3 * std::accumulate(x.begin(), x.end(), 0.0); };
  double e = 0.0, d = 0.0;
  for (int j = k; j <= N0; ++j)
    for (const auto& a : multi_indices(j, dim)) {
      e += vsum(p.full(a)) + p.field_E(a) + p.field_B(a);
      d += weighted_sum(p.micro(a, kZero), vgrid, nullptr, 0.0, true, params.gamma) / (eps * eps);
      if (j == k) d += multinomial(a) * (p.field_E(a) + p.charge(a));
      if (j >= k + 1 && j <= N0 - 1) d += vsum(p.macro(a)) + p.field_E(a) + p.field_B(a);
      if (j == N0) d += vsum(p.macro(a));
    }
  return {e, d};
}

double lambda_norm(std::span<const double> field, double varrho, const SpectralOps& ops) {
  if (field.size() != ops.size()) throw ShapeError("lambda_norm: size mismatch");
  const auto& grid = ops.grid();
  const std::size_t nx = ops.size();
  std::vector<cplx> h(nx);
  ops.forward(field, h);
  std::vector<double> modes(nx), xi(nx);
  const double scale = grid.volume() / (static_cast<double>(nx) * static_cast<double>(nx));
  for (std::size_t m = 0; m < nx; ++m) {
    modes[m] = scale * std::norm(h[m]);
    double s = 0.0;
    for (int a = 0; a < grid.dim; ++a) s += std::pow(grid.wavenumbers[m][a] / grid.box_length[a], 2);
    xi[m] = std::sqrt(s);
  }
  return std::sqrt(lambda_sum(modes, xi, varrho));
}

std::pair<double, double> noncutoff_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, double ell,
                                           double eps, double t, const SobolevParams& params) {
  if (n < 1 || n > p.max_order()) throw ConfigError("noncutoff family: order outside the evaluated range");
  const double P = std::pow(1.0 + t, -0.5 * (1.0 + params.epsilon0));
  const double Q = params.q * params.vartheta / std::pow(1.0 + t, 1.0 + params.vartheta);
  const double g = params.gamma, ie2 = 1.0 / (eps * eps);
  Weights w{vgrid, {WeightFamily::NoncutoffW, ell, params.q, params.vartheta, 0, 0, t}, {}};
  double E = 0.0, D = 0.0;
  for (int kb = 0; kb <= n; ++kb)
    for (const auto& b : multi_indices(kb, 3))
      for (int ka = 0; ka + kb <= n; ++ka)
        for (const auto& a : multi_indices(ka, p.dim())) {
          const auto& W = w(ka, kb);
          const auto prof = p.micro(a, b);
          if (ka + kb <= n - 1) {
            E += weighted_sum(prof, vgrid, &W, 0.0, false, g);
            D += ie2 * weighted_sum(prof, vgrid, &W, 0.0, true, g) + Q * weighted_sum(prof, vgrid, &W, 1.0, false, g);
          } else if (kb >= 1) {
            E += P * weighted_sum(prof, vgrid, &W, 0.0, false, g);
            D += P * (ie2 * weighted_sum(prof, vgrid, &W, 0.0, true, g) + Q * weighted_sum(prof, vgrid, &W, 1.0, false, g));
          } else {
            const auto fp = p.full(a);
            E += P * eps * eps * weighted_sum(fp, vgrid, &W, 0.0, false, g);
            D += P * (weighted_sum(fp, vgrid, &W, 0.0, true, g) + Q * eps * eps * weighted_sum(fp, vgrid, &W, 1.0, false, g));
          }
        }
  return {E, D};
}

std::pair<double, double> cutoff_bar_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, double l,
                                            double t, const SobolevParams& params) {
  if (n < 0 || n > p.max_order()) throw ConfigError("cutoff bar family: order outside the evaluated range");
  const double Q = params.q * params.vartheta / std::pow(1.0 + t, 1.0 + params.vartheta);
  Weights w{vgrid, {WeightFamily::CutoffBar, l, params.q, params.vartheta, 0, 0, t}, {}};
  double E = 0.0, D = 0.0;
  for (int kb = 0; kb <= n; ++kb)
    for (const auto& b : multi_indices(kb, 3))
      for (int ka = 0; ka + kb <= n; ++ka)
        for (const auto& a : multi_indices(ka, p.dim())) {
          const auto& W = w(ka, kb);
          const auto prof = p.micro(a, b);
          E += weighted_sum(prof, vgrid, &W, 0.0, false, params.gamma);
          D += weighted_sum(prof, vgrid, &W, 0.0, true, params.gamma) + Q * weighted_sum(prof, vgrid, &W, 2.0, false, params.gamma);
        }
  return {E, D};
}

std::pair<double, double> cutoff_tilde_block(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, int j,
                                             double ell, double eps, double t, const SobolevParams& params,
                                             const SigmaTable& sigma) {
  if (n < 0 || n > p.max_order() || j < 0 || j > n) throw ConfigError("cutoff tilde block: (n, j) out of range");
  const double Q = params.q * params.vartheta / std::pow(1.0 + t, 1.0 + params.vartheta);
  Weights w{vgrid, {WeightFamily::CutoffTilde, ell, params.q, params.vartheta, 0, 0, t}, {}};
  double E = 0.0, D = 0.0;
  if (n == params.N)
    for (const auto& a : multi_indices(n, p.dim()))
      E += std::pow(1.0 + t, -sigma(params.N, 0)) * weighted_sum(p.full(a), vgrid, &w(n, 0), 0.0, false, params.gamma);
  for (int kb = 0; kb <= j; ++kb) {
    const double decay = std::pow(1.0 + t, -sigma(n, kb));
    for (const auto& b : multi_indices(kb, 3))
      for (const auto& a : multi_indices(n - kb, p.dim())) {
        const auto& W = w(n - kb, kb);
        const auto prof = p.micro(a, b);
        // The microscopic block enters the energy twice, as written.
        E += 2.0 * decay * weighted_sum(prof, vgrid, &W, 0.0, false, params.gamma);
        D += decay * (weighted_sum(prof, vgrid, &W, 0.0, true, params.gamma) +
                      Q * eps * eps * weighted_sum(prof, vgrid, &W, 2.0, false, params.gamma));
      }
  }
  return {E, D};
}

std::pair<double, double> cutoff_tilde_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n,
                                              double ell, double eps, double t, const SobolevParams& params,
                                              const SigmaTable& sigma) {
  double E = 0.0, D = 0.0;
  for (int j = 0; j <= n; ++j) {
    const auto [e, d] = cutoff_tilde_block(p, vgrid, n, j, ell, eps, t, params, sigma);
    E += e;
    D += d;
  }
  return {E, D};
}

std::pair<double, double> low_order_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double ell,
                                           double t, const SobolevParams& params) {
  const int top = params.N0 - 1;
  if (top > p.max_order()) throw ConfigError("low-order family: order outside the evaluated range");
  Weights w{vgrid, {WeightFamily::CutoffBar, ell, params.q, params.vartheta, 0, 0, t}, {}};
  double E = 0.0, D = 0.0;
  for (int ka = 1; ka <= top; ++ka)
    for (const auto& a : multi_indices(ka, p.dim()))
      for (int kb = 0; ka + kb <= top; ++kb)
        for (const auto& b : multi_indices(kb, 3)) {
          const auto& W = w(ka, kb);
          E += weighted_sum(p.micro(a, b), vgrid, &W, 0.0, false, params.gamma);
          D += weighted_sum(p.micro(a, b), vgrid, &W, 0.0, true, params.gamma);
        }
  return {E, D};
}

std::string audit_form_name(AuditForm form) {
  switch (form) {
    case AuditForm::MainThm1: return "main_thm1";
    case AuditForm::MainThm2: return "main_thm2";
    case AuditForm::Basic: return "basic";
  }
  return "?";
}

std::pair<double, double> lyapunov_pair(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double eps, double t,
                                        const SobolevParams& params, AuditForm form) {
  const auto [eN, dN] = energy_dissipation(p, vgrid, eps, params);
  const int N = params.N, N0 = params.N0;
  switch (form) {
    case AuditForm::Basic:
      return {eN, dN};
    case AuditForm::MainThm1: {
      const double l = params.ell_value();
      const double E = noncutoff_family(p, vgrid, N, l, eps, t, params).first + eN;
      const double D = dN + noncutoff_family(p, vgrid, N - 1, l, eps, t, params).second;
      return {E, D};
    }
    case AuditForm::MainThm2: {
      const SigmaTable sigma(N, params.epsilon0);
      const auto c = minimal_chain(N, params.l_bar, sigma);
      double E = eN, D = dN;
      for (int n = 0; n <= N; ++n) {
        const double ell = n <= N0 ? c.ell0 : c.ell1;
        const double wgt = n == N ? eps * eps : 1.0;
        const auto [e, d] = cutoff_tilde_family(p, vgrid, n, ell, eps, t, params, sigma);
        E += wgt * e;
        D += wgt * d;
      }
      const auto b1 = cutoff_bar_family(p, vgrid, N - 1, c.l1, t, params);
      const auto b0 = cutoff_bar_family(p, vgrid, N0 - 1, c.l0, t, params);
      E += b1.first + b0.first + p.lambda_f(params.varrho) + p.lambda_E(params.varrho) + p.lambda_B(params.varrho);
      D += b1.second + b0.second;
      return {E, D};
    }
  }
  return {0.0, 0.0};
}

EnergyReport energy_report(const SpeciesPair& f, const EMState& em, double t, double eps, const VelocityGrid& vgrid,
                           const SpectralOps& ops, const SobolevParams& params) {
  params.validate();
  const PhaseSpaceProfiles p(f, em, vgrid, ops, params.N);
  EnergyReport r;
  r.t = t;
  r.N = params.N;
  r.N0 = params.N0;
  std::tie(r.e_N, r.d_N) = energy_dissipation(p, vgrid, eps, params);
  for (int k = 0; k <= params.N0; ++k) {
    const auto [e, d] = energy_k(p, vgrid, k, eps, params);
    r.e_k_to_N0.push_back(e);
    r.d_k_to_N0.push_back(d);
  }
  r.lambda_f = std::sqrt(p.lambda_f(params.varrho));
  r.lambda_E = std::sqrt(p.lambda_E(params.varrho));
  r.lambda_B = std::sqrt(p.lambda_B(params.varrho));

  const SigmaTable sigma(params.N, params.epsilon0);
  const auto c = minimal_chain(params.N, params.l_bar, sigma);
  const double l = params.ell_value();
  auto& w = r.weighted;
  std::tie(w["E_N_l"], w["D_N_l"]) = noncutoff_family(p, vgrid, params.N, l, eps, t, params);
  w["D_Nm1_l"] = noncutoff_family(p, vgrid, params.N - 1, l, eps, t, params).second;
  std::tie(w["Ebar_Nm1_l1"], w["Dbar_Nm1_l1"]) = cutoff_bar_family(p, vgrid, params.N - 1, c.l1, t, params);
  std::tie(w["Ebar_N0m1_l0"], w["Dbar_N0m1_l0"]) = cutoff_bar_family(p, vgrid, params.N0 - 1, c.l0, t, params);
  for (int n = 0; n <= params.N; ++n) {
    const double ell = n <= params.N0 ? c.ell0 : c.ell1;
    std::tie(w[fmt::format("EE_{}", n)], w[fmt::format("DD_{}", n)]) =
        cutoff_tilde_family(p, vgrid, n, ell, eps, t, params, sigma);
  }
  std::tie(w["E_1_N0m1_l0"], w["D_1_N0m1_l0"]) = low_order_family(p, vgrid, c.l0, t, params);
  for (AuditForm form : {AuditForm::Basic, AuditForm::MainThm1, AuditForm::MainThm2}) {
    const auto [E, D] = lyapunov_pair(p, vgrid, eps, t, params, form);
    w["lyap_" + audit_form_name(form) + "_E"] = E;
    w["lyap_" + audit_form_name(form) + "_D"] = D;
  }
  return r;
}

LyapunovAudit lyapunov_audit(std::span<const double> t, std::span<const double> functional,
                             std::span<const double> dissipation, double c_D, double tol_rel, const std::string& form) {
  const std::size_t K = t.size();
  if (K < 2 || functional.size() != K || dissipation.size() != K)
    throw TrajectoryError("lyapunov audit needs at least 2 aligned samples");
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw TrajectoryError("lyapunov audit: times must increase");
  for (std::size_t k = 1; k < K; ++k)
    if (std::abs(t[k] - t[k - 1] - dt) > 1e-9 * std::max(1.0, std::abs(t[k])))
      throw TrajectoryError("lyapunov audit: samples are not uniformly spaced");
  LyapunovAudit a;
  a.form = form;
  a.c_D = c_D;
  a.tolerance = tol_rel * functional[0];
  a.max_margin = -std::numeric_limits<double>::infinity();
  a.c_fit = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double dE = (functional[k + 1] - functional[k]) / dt;
    const double D = 0.5 * (dissipation[k] + dissipation[k + 1]);
    a.t.push_back(0.5 * (t[k] + t[k + 1]));
    a.derivative.push_back(dE);
    a.dissipation.push_back(D);
    a.margin.push_back(dE + c_D * D);
    a.max_margin = std::max(a.max_margin, a.margin.back());
    if (D > 0.0) a.c_fit = std::min(a.c_fit, -dE / D);
    else if (dE > 0.0) a.c_fit = -std::numeric_limits<double>::infinity();
  }
  a.pass = a.max_margin <= a.tolerance;
  return a;
}

DecayFit decay_fit(std::span<const double> t, std::span<const double> series, int k, double varrho) {
  if (t.size() != series.size() || t.size() < 2) throw TrajectoryError("decay fit needs at least 2 aligned samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(series[i] > 0.0)) throw TrajectoryError("decay fit: series entries must be positive");
    if (t[i] < 0.0) throw TrajectoryError("decay fit: negative time");
    const double x = std::log1p(t[i]), y = std::log(series[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw TrajectoryError("decay fit: degenerate time window");
  DecayFit fit;
  fit.exponent = (n * sxy - sx * sy) / den;
  fit.target = -(k + varrho);
  fit.one_sided_pass = fit.exponent <= fit.target;
  fit.report = fmt::format(
      "fitted exponent {:.4f} against the algebraic rate {:.4f} (k = {}, varrho = {}) over t in [{:.3g}, {:.3g}]. "
      "The periodic box has a spectral gap, so decay is exponential rather than algebraic; the check is one-sided "
      "and passes when the measured decay is at least as fast as the algebraic rate: {}",
      fit.exponent, fit.target, k, varrho, t.front(), t.back(), fit.one_sided_pass ? "pass" : "fail");
  return fit;
}

}  // namespace vmb
