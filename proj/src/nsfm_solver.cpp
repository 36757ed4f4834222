#include "vmb/nsfm_solver.hpp"

#include <cmath>

#include <fmt/format.h>

#include "vmb/errors.hpp"
#include "vmb/fields.hpp"

namespace vmb {

namespace {

enum : int { kU = 0, kTheta = 3, kN = 4, kE = 5, kB = 8 };

double vector_l2_squared(const VectorField& v, const SpectralOps& ops) {
  return ops.l2_squared(v[0]) + ops.l2_squared(v[1]) + ops.l2_squared(v[2]);
}

}  // namespace

NSFMState::NSFMState(std::size_t nodes)
    : u(zero_vector_field(nodes)),
      theta(nodes, 0.0),
      n(nodes, 0.0),
      E(zero_vector_field(nodes)),
      B(zero_vector_field(nodes)),
      p(nodes, 0.0) {}

std::vector<double> NSFMState::rho() const {
  std::vector<double> r(theta.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = -theta[i];
  return r;
}

std::vector<double> NSFMState::w() const {
  std::vector<double> r(theta.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = 1.5 * n[i] * theta[i];
  return r;
}

VectorField ohm_current(const NSFMState& s, double sigma, const SpectralOps& ops) {
  const std::size_t nx = ops.size();
  if (s.spatial_nodes() != nx) throw ShapeError("ohm_current: size mismatch");
  const auto gn = ops.gradient(s.n);
  VectorField j = zero_vector_field(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    const Vec3 u{s.u[0][x], s.u[1][x], s.u[2][x]}, B{s.B[0][x], s.B[1][x], s.B[2][x]};
    const Vec3 uB = cross(u, B);
    for (int a = 0; a < 3; ++a) j[a][x] = s.n[x] * u[a] + sigma * (-0.5 * gn[a][x] + s.E[a][x] + uB[a]);
  }
  return j;
}

double nsfm_energy(const NSFMState& s, const SpectralOps& ops) {
  return vector_l2_squared(s.u, ops) + 2.5 * ops.l2_squared(s.theta) + 0.25 * ops.l2_squared(s.n) +
         0.5 * vector_l2_squared(s.E, ops) + 0.5 * vector_l2_squared(s.B, ops);
}

NSFMSolver::NSFMSolver(const SpatialGrid& grid, NSFMConfig config) : grid_(grid), ops_(grid), config_(config) {
  if (!(config_.mu > 0.0) || !(config_.kappa > 0.0) || !(config_.sigma > 0.0))
    throw ConfigError("nsfm: mu, kappa and sigma must be positive");
  if (!(config_.dt > 0.0)) throw ConfigError("nsfm.dt must be positive");
  keep_.resize(ops_.size());
  const int cut = grid_.points_per_axis / 3;
  for (std::size_t m = 0; m < ops_.size(); ++m) {
    bool k = true;
    for (int a = 0; a < grid_.dim; ++a) k = k && std::abs(grid_.wavenumbers[m][a]) <= cut;
    keep_[m] = config_.dealias ? k : 1;
  }
}

NSFMSolver::Spectral NSFMSolver::to_spectral(const NSFMState& s) const {
  if (s.spatial_nodes() != ops_.size()) throw ShapeError("nsfm state does not match the grid");
  Spectral y;
  const std::array<const std::vector<double>*, kFields> src{&s.u[0], &s.u[1], &s.u[2], &s.theta, &s.n, &s.E[0],
                                                            &s.E[1], &s.E[2], &s.B[0], &s.B[1], &s.B[2]};
  for (int c = 0; c < kFields; ++c) {
    y[c].resize(ops_.size());
    ops_.forward(*src[c], y[c]);
  }
  return y;
}

void NSFMSolver::from_spectral(const Spectral& y, NSFMState& s) const {
  const std::array<std::vector<double>*, kFields> dst{&s.u[0], &s.u[1], &s.u[2], &s.theta, &s.n, &s.E[0],
                                                      &s.E[1], &s.E[2], &s.B[0], &s.B[1], &s.B[2]};
  for (int c = 0; c < kFields; ++c) ops_.inverse(y[c], *dst[c]);
}

void NSFMSolver::linear_flow(Spectral& y, double dt) const {
  for (std::size_t m = 0; m < ops_.size(); ++m) {
    const double k2 = norm2(grid_.wavevector(m));
    const double du = std::exp(-config_.mu * k2 * dt), dth = std::exp(-config_.kappa * k2 * dt);
    for (int a = 0; a < 3; ++a) y[kU + a][m] *= du;
    y[kTheta][m] *= dth;
    std::array<cplx, 3> E{y[kE][m], y[kE + 1][m], y[kE + 2][m]}, B{y[kB][m], y[kB + 1][m], y[kB + 2][m]};
    rotate_mode(ops_.effective_wavevector(m), dt, E, B);
    for (int a = 0; a < 3; ++a) {
      y[kE + a][m] = E[a];
      y[kB + a][m] = B[a];
    }
  }
}

NSFMSolver::Spectral NSFMSolver::forcing(const Spectral& y, std::vector<cplx>* pressure) const {
  const std::size_t nx = ops_.size();
  const cplx I(0.0, 1.0);
  auto phys = [&](const std::vector<cplx>& h, bool masked) {
    std::vector<cplx> tmp = h;
    if (masked)
      for (std::size_t m = 0; m < nx; ++m)
        if (!keep_[m]) tmp[m] = 0.0;
    std::vector<double> out(nx);
    ops_.inverse(tmp, out);
    return out;
  };
  auto spec = [&](const std::vector<double>& f, bool masked) {
    std::vector<cplx> h(nx);
    ops_.forward(f, h);
    if (masked)
      for (std::size_t m = 0; m < nx; ++m)
        if (!keep_[m]) h[m] = 0.0;
    return h;
  };
  auto grad_hat = [&](const std::vector<cplx>& h, int a) {
    std::vector<cplx> g(nx);
    for (std::size_t m = 0; m < nx; ++m) g[m] = I * ops_.effective_wavevector(m)[a] * h[m];
    return g;
  };

  // Dealiased physical fields for the quadratic products.
  VectorField u, E, B;
  for (int a = 0; a < 3; ++a) {
    u[a] = phys(y[kU + a], true);
    E[a] = phys(y[kE + a], true);
    B[a] = phys(y[kB + a], true);
  }
  const auto n = phys(y[kN], true);

  // Ohm current: linear part exact in Fourier space, products dealiased.
  std::array<std::vector<cplx>, 3> jh;
  {
    VectorField prod = zero_vector_field(nx);
    for (std::size_t x = 0; x < nx; ++x) {
      const Vec3 uB = cross({u[0][x], u[1][x], u[2][x]}, {B[0][x], B[1][x], B[2][x]});
      for (int a = 0; a < 3; ++a) prod[a][x] = n[x] * u[a][x] + config_.sigma * uB[a];
    }
    for (int a = 0; a < 3; ++a) {
      jh[a] = spec(prod[a], true);
      const auto gn = grad_hat(y[kN], a);
      for (std::size_t m = 0; m < nx; ++m) jh[a][m] += config_.sigma * (-0.5 * gn[m] + y[kE + a][m]);
    }
  }
  VectorField j;
  for (int a = 0; a < 3; ++a) j[a] = phys(jh[a], true);

  // Momentum forcing G = -(u.grad)u + 1/2 (n E + j x B).
  std::array<std::vector<double>, 9> du;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) du[3 * a + b] = phys(grad_hat(y[kU + a], b), true);
  const std::array<std::vector<double>, 3> dth{phys(grad_hat(y[kTheta], 0), true), phys(grad_hat(y[kTheta], 1), true),
                                               phys(grad_hat(y[kTheta], 2), true)};
  VectorField G = zero_vector_field(nx);
  std::vector<double> adv_theta(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    const Vec3 jB = cross({j[0][x], j[1][x], j[2][x]}, {B[0][x], B[1][x], B[2][x]});
    for (int a = 0; a < 3; ++a) {
      double adv = 0.0;
      for (int b = 0; b < 3; ++b) adv += u[b][x] * du[3 * a + b][x];
      G[a][x] = -adv + 0.5 * (n[x] * E[a][x] + jB[a]);
      adv_theta[x] -= u[a][x] * dth[a][x];
    }
  }

  Spectral out;
  for (auto& c : out) c.assign(nx, 0.0);
  std::array<std::vector<cplx>, 3> Gh{spec(G[0], true), spec(G[1], true), spec(G[2], true)};
  if (pressure) pressure->assign(nx, 0.0);
  for (std::size_t m = 0; m < nx; ++m) {
    const Vec3 k = ops_.effective_wavevector(m);
    const double k2 = norm2(k);
    const cplx kG = k[0] * Gh[0][m] + k[1] * Gh[1][m] + k[2] * Gh[2][m];
    for (int a = 0; a < 3; ++a) out[kU + a][m] = k2 > 0.0 ? Gh[a][m] - kG * k[a] / k2 : Gh[a][m];
    if (pressure && k2 > 0.0) (*pressure)[m] = -I * kG / k2;
    out[kN][m] = -I * (k[0] * jh[0][m] + k[1] * jh[1][m] + k[2] * jh[2][m]);
    for (int a = 0; a < 3; ++a) out[kE + a][m] = -jh[a][m];
  }
  out[kTheta] = spec(adv_theta, true);
  return out;
}

void NSFMSolver::step(NSFMState& s, double dt) const {
  if (!(dt > 0.0)) throw ConfigError("nsfm step: dt must be positive");
  const Spectral y0 = to_spectral(s);
  const Spectral n0 = forcing(y0, nullptr);
  Spectral pred = y0, corr = y0;
  for (int c = 0; c < kFields; ++c)
    for (std::size_t m = 0; m < ops_.size(); ++m) {
      pred[c][m] += dt * n0[c][m];
      corr[c][m] += 0.5 * dt * n0[c][m];
    }
  linear_flow(pred, dt);
  linear_flow(corr, dt);
  std::vector<cplx> ph;
  const Spectral n1 = forcing(pred, &ph);
  for (int c = 0; c < kFields; ++c)
    for (std::size_t m = 0; m < ops_.size(); ++m) corr[c][m] += 0.5 * dt * n1[c][m];
  from_spectral(corr, s);
  ops_.inverse(ph, s.p);
  s.t += dt;
}

NSFMStepInfo NSFMSolver::describe(const NSFMState& s, double dt) const {
  NSFMStepInfo info;
  info.t = s.t;
  info.energy = nsfm_energy(s, ops_);
  info.div_u = std::sqrt(ops_.l2_squared(ops_.divergence(s.u)));
  auto dE = ops_.divergence(s.E);
  for (std::size_t i = 0; i < dE.size(); ++i) dE[i] -= s.n[i];
  info.gauss_E = std::sqrt(ops_.l2_squared(dE));
  info.gauss_B = std::sqrt(ops_.l2_squared(ops_.divergence(s.B)));
  double umax = 0.0;
  for (std::size_t x = 0; x < s.spatial_nodes(); ++x)
    umax = std::max(umax, std::sqrt(s.u[0][x] * s.u[0][x] + s.u[1][x] * s.u[1][x] + s.u[2][x] * s.u[2][x]));
  info.cfl = dt * umax * grid_.points_per_axis / grid_.box_length[0];
  return info;
}

NSFMTrajectory NSFMSolver::run(NSFMState init, const Observer& observer) const {
  const double span = config_.t_end - init.t;
  if (span < 0.0) throw ConfigError("nsfm.t_end precedes the initial time");
  NSFMTrajectory traj;
  traj.steps = span > 0.0 ? static_cast<std::size_t>(std::ceil(span / config_.dt - 1e-9)) : 0;
  traj.dt = traj.steps > 0 ? span / static_cast<double>(traj.steps) : config_.dt;
  NSFMState s = std::move(init);
  auto record = [&](std::size_t n) {
    const auto info = describe(s, traj.dt);
    if (info.cfl > 0.5 && traj.warnings.size() < 16)
      traj.warnings.push_back(fmt::format("advective CFL {:.3f} > 0.5 at t = {:.4g}", info.cfl, s.t));
    traj.info.push_back(info);
    if (observer) observer(s, info);
    if (n == 0 || n == traj.steps || (config_.stride > 0 && n % config_.stride == 0)) traj.frames.push_back(s);
  };
  record(0);
  for (std::size_t n = 1; n <= traj.steps; ++n) {
    step(s, traj.dt);
    bool ok = std::isfinite(nsfm_energy(s, ops_));
    if (!ok) throw NumericalAbort(fmt::format("nsfm: non-finite state at step {} (t = {:.6g})", n, s.t));
    record(n);
  }
  return traj;
}

}  // namespace vmb
