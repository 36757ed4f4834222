#include "vmb/vmb_solver.hpp"

#include <cmath>
#include <tuple>

#include <fmt/format.h>

#include "vmb/errors.hpp"
#include "vmb/fields.hpp"
#include "vmb/macromicro.hpp"
#include "vmb/snapshot.hpp"

namespace vmb {

namespace {

double discrete_mass(const VelocityGrid& vgrid) {
  double s = 0.0;
  for (std::size_t i = 0; i < vgrid.size(); ++i) s += vgrid.quad_weights[i] * vgrid.maxwellian[i];
  return s;
}

double max_abs_vector(const VectorField& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v[0].size(); ++i) m = std::max(m, std::sqrt(v[0][i] * v[0][i] + v[1][i] * v[1][i] + v[2][i] * v[2][i]));
  return m;
}

}  // namespace

VectorField gauss_field(std::span<const double> n, const SpectralOps& ops) {
  if (n.size() != ops.size()) throw ShapeError("gauss_field: size mismatch");
  std::vector<cplx> nh(ops.size());
  ops.forward(n, nh);
  std::array<std::vector<cplx>, 3> Eh;
  for (auto& c : Eh) c.assign(ops.size(), 0.0);
  const cplx i(0.0, 1.0);
  for (std::size_t m = 0; m < ops.size(); ++m) {
    const Vec3 k = ops.effective_wavevector(m);
    const double k2 = norm2(k);
    if (k2 == 0.0) continue;
    for (int a = 0; a < 3; ++a) Eh[a][m] = -i * k[a] * nh[m] / k2;
  }
  VectorField E;
  for (int a = 0; a < 3; ++a) {
    E[a].resize(ops.size());
    ops.inverse(Eh[a], E[a]);
  }
  return E;
}

VectorField leray_project(const VectorField& u, const SpectralOps& ops) {
  std::array<std::vector<cplx>, 3> h;
  for (int a = 0; a < 3; ++a) {
    if (u[a].size() != ops.size()) throw ShapeError("leray_project: size mismatch");
    h[a].resize(ops.size());
    ops.forward(u[a], h[a]);
  }
  for (std::size_t m = 0; m < ops.size(); ++m) {
    const Vec3 k = ops.effective_wavevector(m);
    const double k2 = norm2(k);
    if (k2 == 0.0) continue;
    const cplx kv = (k[0] * h[0][m] + k[1] * h[1][m] + k[2] * h[2][m]) / k2;
    for (int a = 0; a < 3; ++a) h[a][m] -= kv * k[a];
  }
  VectorField out;
  for (int a = 0; a < 3; ++a) {
    out[a].resize(ops.size());
    ops.inverse(h[a], out[a]);
  }
  return out;
}

VMBState well_prepared_init(const MacroFields& macro, const EMState& em, const VelocityGrid& vgrid,
                            const SpectralOps& ops) {
  const std::size_t nx = ops.size(), nv = vgrid.size();
  if (macro.rho.size() != nx || macro.theta.size() != nx || macro.n.size() != nx || macro.u[0].size() != nx ||
      em.spatial_nodes() != nx)
    throw ShapeError("well_prepared_init: field sizes do not match the spatial grid");
  {
    auto div = ops.divergence(em.E);
    double num = 0.0, den = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      num += (div[x] - macro.n[x]) * (div[x] - macro.n[x]);
      den += macro.n[x] * macro.n[x];
    }
    // The mean of n is not representable by a periodic div E.
    double mean = 0.0;
    for (double v : macro.n) mean += v;
    mean /= static_cast<double>(nx);
    num -= static_cast<double>(nx) * mean * mean;
    const double rel = std::sqrt(std::max(num, 0.0) / std::max(den, 1e-300));
    if (rel > 1e-10) throw GaussInconsistencyError(fmt::format("initial E violates div E = n (relative residual {:.3e})", rel));
  }
  // Density parts are divided by the discrete mass of M so that the discrete
  // charge density equals n exactly.
  const double m0 = discrete_mass(vgrid);
  VMBState st{SpeciesPair(nx, nv), em, em.t};
  st.f.time_stamp = em.t;
  for (std::size_t x = 0; x < nx; ++x) {
    const Vec3 u{macro.u[0][x], macro.u[1][x], macro.u[2][x]};
    for (std::size_t i = 0; i < nv; ++i) {
      const Vec3& v = vgrid.nodes[i];
      const double sm = vgrid.sqrt_maxwellian[i];
      const double common = (dot(u, v) + macro.theta[x] * (0.5 * norm2(v) - 1.5)) * sm;
      st.f.at(0, x, i) = (macro.rho[x] + 0.5 * macro.n[x]) / m0 * sm + common;
      st.f.at(1, x, i) = (macro.rho[x] - 0.5 * macro.n[x]) / m0 * sm + common;
    }
  }
  return st;
}

VMBSolver::VMBSolver(const SpatialGrid& sgrid, const VelocityGrid& vgrid, std::shared_ptr<const LinearizedOperator> linear,
                     std::shared_ptr<const NonlinearOperator> nonlinear, VMBConfig config)
    : sgrid_(sgrid), vgrid_(vgrid), ops_(sgrid), linear_(std::move(linear)), nonlinear_(std::move(nonlinear)),
      config_(std::move(config)) {
  if (!(config_.eps > 0.0)) throw ConfigError("vmb.eps must be positive");
  if (!linear_) throw ConfigError("VMBSolver needs a linearized operator");
  if (linear_->velocity_dofs() != vgrid_.size()) throw ShapeError("linearized operator does not match the velocity grid");
  if (config_.nonlinear && !nonlinear_) throw ConfigError("nonlinear term requested without an operator");
}

std::array<double, 2> VMBSolver::species_mass(const SpeciesPair& f) const {
  std::array<double, 2> m{0.0, 0.0};
  const double cv = sgrid_.cell_volume();
  for (int s = 0; s < 2; ++s) {
    const auto blk = f.block(s);
    for (std::size_t i = 0; i < vgrid_.size(); ++i)
      m[s] += vgrid_.quad_weights[i] * vgrid_.sqrt_maxwellian[i] * blk.row(static_cast<Eigen::Index>(i)).sum();
    m[s] *= cv;
  }
  return m;
}

double VMBSolver::resolve_dt(const VMBState& init) const {
  const double span = config_.t_end - init.t;
  if (!(span > 0.0)) throw ConfigError("vmb.t_end must exceed the initial time");
  const auto& p = config_.dt_policy;
  double dt = 0.0;
  switch (p.kind) {
    case DtPolicyKind::Fixed:
      dt = p.dt;
      break;
    case DtPolicyKind::PowerLaw:
      dt = p.dt_ref * std::pow(config_.eps / p.eps_ref, p.exponent);
      break;
    case DtPolicyKind::Cfl: {
      const double dx = sgrid_.box_length[0] / sgrid_.points_per_axis;
      const double vmax = vgrid_.v_max * std::sqrt(3.0);
      dt = dx * config_.eps / vmax;
      const double force = max_abs_vector(init.em.E) * config_.eps + vmax * max_abs_vector(init.em.B);
      if (force > 0.0) dt = std::min(dt, config_.eps * vgrid_.spacing / force);
      dt *= p.cfl_factor;
      break;
    }
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step policy produced a non-positive dt");
  const double steps = std::ceil(span / dt - 1e-9);
  return span / steps;
}

void VMBSolver::transport(VMBState& st, double tau) const {
  const std::size_t nx = ops_.size(), nv = vgrid_.size(), count = 2 * nv;
  const double eps = config_.eps;
  std::vector<cplx> buf(nx * count);
  for (int s = 0; s < 2; ++s)
    for (std::size_t x = 0; x < nx; ++x) {
      const auto g = st.f.slice(s, x);
      cplx* row = buf.data() + x * count + static_cast<std::size_t>(s) * nv;
      for (std::size_t i = 0; i < nv; ++i) row[i] = g[i];
    }
  ops_.forward_batch(buf, count);
  // Time integral of the current over the sub-step, per mode; it drives the
  // longitudinal field so that div E - n is unchanged.
  std::array<std::vector<cplx>, 3> Jint;
  for (auto& c : Jint) c.assign(nx, 0.0);
  const bool fields = config_.fields;
#pragma omp parallel for schedule(static)
  for (long l = 0; l < static_cast<long>(nx); ++l) {
    const auto m = static_cast<std::size_t>(l);
    const Vec3 k = ops_.effective_wavevector(m);
    cplx* row = buf.data() + m * count;
    cplx acc[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < nv; ++i) {
      const Vec3& v = vgrid_.nodes[i];
      const double a = dot(k, v) / eps;
      const cplx phase = std::polar(1.0, -tau * a);
      const cplx phi = a == 0.0 ? cplx(tau) : (1.0 - phase) / cplx(0.0, a);
      if (fields) {
        const cplx q = (row[i] - row[nv + i]) * phi * (vgrid_.quad_weights[i] * vgrid_.sqrt_maxwellian[i] / eps);
        for (int d = 0; d < 3; ++d) acc[d] += q * v[d];
      }
      row[i] *= phase;
      row[nv + i] *= phase;
    }
    for (int d = 0; d < 3; ++d) Jint[d][m] = acc[d];
  }
  ops_.inverse_batch(buf, count);
  for (int s = 0; s < 2; ++s)
    for (std::size_t x = 0; x < nx; ++x) {
      auto g = st.f.slice(s, x);
      const cplx* row = buf.data() + x * count + static_cast<std::size_t>(s) * nv;
      for (std::size_t i = 0; i < nv; ++i) g[i] = row[i].real();
    }
  if (!fields) return;
  std::array<std::vector<cplx>, 3> Eh;
  for (int a = 0; a < 3; ++a) {
    Eh[a].resize(nx);
    ops_.forward(st.em.E[a], Eh[a]);
  }
  for (std::size_t m = 0; m < nx; ++m) {
    const Vec3 k = ops_.effective_wavevector(m);
    const double k2 = norm2(k);
    if (k2 == 0.0) continue;
    const cplx kj = (k[0] * Jint[0][m] + k[1] * Jint[1][m] + k[2] * Jint[2][m]) / k2;
    for (int a = 0; a < 3; ++a) Eh[a][m] -= kj * k[a];
  }
  for (int a = 0; a < 3; ++a) ops_.inverse(Eh[a], st.em.E[a]);
}

void VMBSolver::forces(VMBState& st, double tau) const {
  if (!config_.fields) return;
  const double eps = config_.eps;
  auto jt = [&](const SpeciesPair& f) { return transverse_part(current_density(f, eps, vgrid_), ops_); };
  // Explicit midpoint on the coupled (f, E, B) force system.
  const SpeciesPair k1 = force_terms(st.f, st.em, eps, vgrid_);
  SpeciesPair f_half = st.f;
  f_half.axpy(0.5 * tau, k1);
  const EMState em_half = maxwell_step(st.em, jt(st.f), 0.5 * tau, ops_);
  const SpeciesPair k2 = force_terms(f_half, em_half, eps, vgrid_);
  EMState em_new = maxwell_step(st.em, jt(f_half), tau, ops_);
  st.f.axpy(tau, k2);
  st.em.E = std::move(em_new.E);
  st.em.B = std::move(em_new.B);
}

void VMBSolver::collide(VMBState& st, double dt) const {
  const double eps = config_.eps;
  if (config_.nonlinear) st.f.axpy(dt / eps, nonlinear_->apply(st.f, st.f));
  const auto inv = linear_->shifted_inverse(dt / (eps * eps));
  const auto nv = static_cast<Eigen::Index>(vgrid_.size());
  const Eigen::MatrixXd fp = st.f.block(0), fm = st.f.block(1);
  st.f.block(0).noalias() = inv->topLeftCorner(nv, nv) * fp;
  st.f.block(0).noalias() += inv->topRightCorner(nv, nv) * fm;
  st.f.block(1).noalias() = inv->bottomLeftCorner(nv, nv) * fp;
  st.f.block(1).noalias() += inv->bottomRightCorner(nv, nv) * fm;
}

StepDiagnostics VMBSolver::step(VMBState& st, double dt, const std::array<double, 2>& target_mass) const {
  if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
  transport(st, 0.5 * dt);
  forces(st, 0.5 * dt);
  collide(st, dt);
  forces(st, 0.5 * dt);
  transport(st, 0.5 * dt);
  st.t += dt;
  st.em.t = st.t;
  st.f.time_stamp = st.t;

  StepDiagnostics d;
  d.t = st.t;
  d.dt = dt;
  if (config_.conservation_fixup) {
    const auto m = species_mass(st.f);
    const double unit = sgrid_.cell_volume() * static_cast<double>(ops_.size()) * discrete_mass(vgrid_);
    for (int s = 0; s < 2; ++s) {
      const double c = (target_mass[s] - m[s]) / unit;
      auto blk = st.f.species(s);
      for (std::size_t x = 0; x < ops_.size(); ++x)
        for (std::size_t i = 0; i < vgrid_.size(); ++i) blk[x * vgrid_.size() + i] += c * vgrid_.sqrt_maxwellian[i];
      (s == 0 ? d.fixup_plus : d.fixup_minus) = std::abs(c);
    }
  }
  const auto m = species_mass(st.f);
  d.mass_plus = m[0];
  d.mass_minus = m[1];
  std::tie(d.gauss_E, d.gauss_B) = gauss_residuals(st.em, st.f, vgrid_, ops_);
  return d;
}

Trajectory VMBSolver::run(VMBState init, const Observer& observer) const {
  if (init.f.spatial_nodes() != ops_.size() || init.f.velocity_nodes() != vgrid_.size())
    throw ShapeError("initial state does not match the grids");
  Trajectory traj;
  const bool empty = config_.t_end == init.t;
  traj.dt = empty ? 0.0 : resolve_dt(init);
  traj.steps = empty ? 0 : static_cast<std::size_t>(std::llround((config_.t_end - init.t) / traj.dt));
  const auto target = species_mass(init.f);

  StepDiagnostics d0;
  d0.t = init.t;
  d0.mass_plus = target[0];
  d0.mass_minus = target[1];
  std::tie(d0.gauss_E, d0.gauss_B) = gauss_residuals(init.em, init.f, vgrid_, ops_);
  traj.diagnostics.push_back(d0);
  if (observer) observer(init, d0);
  traj.frames.push_back({init.t, init.f, init.em});

  VMBState st = std::move(init);
  VMBState previous = st;
  for (std::size_t n = 1; n <= traj.steps; ++n) {
    previous = st;
    const auto d = step(st, traj.dt, target);
    const bool ok = st.f.finite() && std::isfinite(d.gauss_E) && std::isfinite(field_energy(st.em, ops_));
    if (!ok) {
      if (!config_.dump_dir.empty()) {
        std::filesystem::create_directories(config_.dump_dir);
        SnapshotHeader h{static_cast<std::uint32_t>(sgrid_.dim), static_cast<std::uint32_t>(sgrid_.points_per_axis),
                         sgrid_.box_length[0], static_cast<std::uint32_t>(vgrid_.points_per_axis), vgrid_.v_max,
                         config_.eps, previous.t};
        write_snapshot(config_.dump_dir / "abort_last_finite.vmbs", h, previous.f, previous.em);
        h.t = st.t;
        write_snapshot(config_.dump_dir / "abort_nonfinite.vmbs", h, st.f, st.em);
      }
      throw NumericalAbort(fmt::format("non-finite state at step {} (t = {:.6g}, eps = {:.4g}, dt = {:.4g})", n, st.t,
                                       config_.eps, traj.dt));
    }
    traj.diagnostics.push_back(d);
    if (observer) observer(st, d);
    const bool keep = n == traj.steps || (config_.stride > 0 && n % config_.stride == 0);
    if (keep) traj.frames.push_back({st.t, st.f, st.em});
  }
  return traj;
}

}  // namespace vmb
