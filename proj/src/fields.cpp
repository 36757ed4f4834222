#include "vmb/fields.hpp"

#include <cmath>

#include "vmb/errors.hpp"
#include "vmb/macromicro.hpp"

namespace vmb {

namespace {

using CVec = std::array<cplx, 3>;

CVec cross_ik(const Vec3& k, const CVec& x) {
  const cplx i(0.0, 1.0);
  return {i * (k[1] * x[2] - k[2] * x[1]), i * (k[2] * x[0] - k[0] * x[2]), i * (k[0] * x[1] - k[1] * x[0])};
}

std::array<std::vector<cplx>, 3> transform(const VectorField& v, const SpectralOps& ops) {
  std::array<std::vector<cplx>, 3> out;
  for (int a = 0; a < 3; ++a) {
    out[a].resize(ops.size());
    ops.forward(v[a], out[a]);
  }
  return out;
}

VectorField inverse(const std::array<std::vector<cplx>, 3>& hat, const SpectralOps& ops) {
  VectorField out;
  for (int a = 0; a < 3; ++a) {
    out[a].resize(ops.size());
    ops.inverse(hat[a], out[a]);
  }
  return out;
}

}  // namespace

void rotate_mode(const Vec3& k, double tau, std::array<cplx, 3>& E, std::array<cplx, 3>& B) {
  using CVec = std::array<cplx, 3>;
  const double K2 = norm2(k);
  if (K2 == 0.0) return;
  const double K = std::sqrt(K2);
  const cplx ek = (E[0] * k[0] + E[1] * k[1] + E[2] * k[2]) / K2;
  const cplx bk = (B[0] * k[0] + B[1] * k[1] + B[2] * k[2]) / K2;
  CVec Ep, Bp, Et, Bt;
  for (int a = 0; a < 3; ++a) {
    Ep[a] = ek * k[a];
    Bp[a] = bk * k[a];
    Et[a] = E[a] - Ep[a];
    Bt[a] = B[a] - Bp[a];
  }
  const double c = std::cos(K * tau), s = std::sin(K * tau) / K;
  const CVec cb = cross_ik(k, Bt), ce = cross_ik(k, Et);
  for (int a = 0; a < 3; ++a) {
    E[a] = Ep[a] + c * Et[a] + s * cb[a];
    B[a] = Bp[a] + c * Bt[a] - s * ce[a];
  }
}

EMState maxwell_step(const EMState& state, const VectorField& current, double dt, const SpectralOps& ops) {
  if (!(dt > 0.0)) throw ConfigError("maxwell_step: dt must be positive");
  const std::size_t n = ops.size();
  if (state.spatial_nodes() != n || current[0].size() != n) throw ShapeError("maxwell_step: size mismatch");
  auto E = transform(state.E, ops);
  auto B = transform(state.B, ops);
  const auto J = transform(current, ops);
#pragma omp parallel for schedule(static)
  for (long l = 0; l < static_cast<long>(n); ++l) {
    const auto m = static_cast<std::size_t>(l);
    const Vec3 k = ops.effective_wavevector(m);
    CVec e{E[0][m], E[1][m], E[2][m]}, b{B[0][m], B[1][m], B[2][m]};
    CVec je{J[0][m], J[1][m], J[2][m]}, jb{0.0, 0.0, 0.0};
    if (norm2(k) == 0.0) {
      for (int a = 0; a < 3; ++a) e[a] -= dt * je[a];
    } else {
      rotate_mode(k, dt, e, b);
      rotate_mode(k, 0.5 * dt, je, jb);
      for (int a = 0; a < 3; ++a) {
        e[a] -= dt * je[a];
        b[a] -= dt * jb[a];
      }
    }
    for (int a = 0; a < 3; ++a) {
      E[a][m] = e[a];
      B[a][m] = b[a];
    }
  }
  EMState out;
  out.E = inverse(E, ops);
  out.B = inverse(B, ops);
  out.t = state.t + dt;
  return out;
}

std::pair<double, double> gauss_residuals(const EMState& state, const SpeciesPair& f, const VelocityGrid& vgrid,
                                          const SpectralOps& ops) {
  auto divE = ops.divergence(state.E);
  const auto n = charge_density(f, vgrid);
  for (std::size_t i = 0; i < divE.size(); ++i) divE[i] -= n[i];
  const auto divB = ops.divergence(state.B);
  return {std::sqrt(ops.l2_squared(divE)), std::sqrt(ops.l2_squared(divB))};
}

SpeciesPair force_terms(const SpeciesPair& f, const EMState& em, double eps, const VelocityGrid& vgrid) {
  if (!(eps > 0.0)) throw ConfigError("force_terms: eps must be positive");
  const std::size_t nx = f.spatial_nodes(), nv = vgrid.size();
  if (f.velocity_nodes() != nv || em.spatial_nodes() != nx) throw ShapeError("force_terms: shape mismatch");
  SpeciesPair out(nx, nv);
  out.time_stamp = f.time_stamp;
  double m0 = 0.0;
  for (std::size_t i = 0; i < nv; ++i) m0 += vgrid.quad_weights[i] * vgrid.maxwellian[i];
#pragma omp parallel for schedule(static)
  for (long l = 0; l < static_cast<long>(nx); ++l) {
    const auto x = static_cast<std::size_t>(l);
    const Vec3 E{em.E[0][x], em.E[1][x], em.E[2][x]};
    const Vec3 B{em.B[0][x], em.B[1][x], em.B[2][x]};
    if (norm2(E) == 0.0 && norm2(B) == 0.0) continue;
    for (int s = 0; s < 2; ++s) {
      const double q = kQ1[s];
      const auto g = f.slice(s, x);
      const std::array<std::vector<double>, 3> grad{velocity_derivative(g, vgrid, {1, 0, 0}),
                                                    velocity_derivative(g, vgrid, {0, 1, 0}),
                                                    velocity_derivative(g, vgrid, {0, 0, 1})};
      auto o = out.slice(s, x);
      for (std::size_t i = 0; i < nv; ++i) {
        const Vec3& v = vgrid.nodes[i];
        const Vec3 vb = cross(v, B);
        const double ev = dot(E, v);
        double adv = 0.0;
        for (int a = 0; a < 3; ++a) adv += (E[a] + vb[a] / eps) * grad[a][i];
        o[i] = -q * adv + q * ev * vgrid.sqrt_maxwellian[i] / eps + 0.5 * q * ev * g[i];
      }
      // The boundary stencils of the velocity difference leak a little mass;
      // remove it along sqrt(M) so the discrete charge is conserved.
      double leak = 0.0;
      for (std::size_t i = 0; i < nv; ++i) leak += vgrid.quad_weights[i] * vgrid.sqrt_maxwellian[i] * o[i];
      for (std::size_t i = 0; i < nv; ++i) o[i] -= leak / m0 * vgrid.sqrt_maxwellian[i];
    }
  }
  return out;
}

VectorField transverse_part(const VectorField& v, const SpectralOps& ops) {
  auto hat = transform(v, ops);
  for (std::size_t m = 0; m < ops.size(); ++m) {
    const Vec3 k = ops.effective_wavevector(m);
    const double k2 = norm2(k);
    if (k2 == 0.0) continue;
    const cplx kv = (hat[0][m] * k[0] + hat[1][m] * k[1] + hat[2][m] * k[2]) / k2;
    for (int a = 0; a < 3; ++a) hat[a][m] -= kv * k[a];
  }
  return inverse(hat, ops);
}

double field_energy(const EMState& em, const SpectralOps& ops) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += ops.l2_squared(em.E[a]) + ops.l2_squared(em.B[a]);
  return 0.5 * s;
}

}  // namespace vmb
