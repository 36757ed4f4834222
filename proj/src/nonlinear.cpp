#include "vmb/nonlinear.hpp"

#include "collision_detail.hpp"
#include "vmb/errors.hpp"

namespace vmb {

namespace {

using RowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_shapes(const SpeciesPair& f, const SpeciesPair& g, const VelocityGrid& grid) {
  if (!f.same_shape(g) || f.velocity_nodes() != grid.size()) throw ShapeError("nonlinear_T: shape mismatch");
}

// Stacked-vector version of the gain/loss quadrature at one spatial node.
Eigen::VectorXd direct_node(const double* fp, const double* fm, const double* gp, const double* gm,
                            const CollisionKernel& kernel, const VelocityGrid& grid, const AngularQuadrature& aq) {
  const std::size_t nv = grid.size();
  std::vector<double> s(nv);
  for (std::size_t i = 0; i < nv; ++i) s[i] = gp[i] + gm[i];
  const std::span<const double> fps(fp, nv), fms(fm, nv);
  Eigen::VectorXd out(static_cast<Eigen::Index>(2 * nv));
  for (std::size_t iv = 0; iv < nv; ++iv) {
    double gain_p = 0.0, gain_m = 0.0, loss = 0.0;
    detail::for_each_partner(grid, aq, kernel, iv, [&](std::size_t iu, double K, const Vec3& vp, const Vec3& up) {
      const double w = K * grid.sqrt_maxwellian[iu];
      const Stencil sv = trilinear_stencil(vp, grid);
      const double su = w * interpolate(s, trilinear_stencil(up, grid));
      gain_p += su * interpolate(fps, sv);
      gain_m += su * interpolate(fms, sv);
      loss += w * s[iu];
    });
    out(static_cast<Eigen::Index>(iv)) = gain_p - fp[iv] * loss;
    out(static_cast<Eigen::Index>(nv + iv)) = gain_m - fm[iv] * loss;
  }
  return out;
}

void project_nodes(SpeciesPair& out, const Eigen::MatrixXd& E, double w) {
  const auto nv = static_cast<Eigen::Index>(out.velocity_nodes());
  auto P = out.block(0);
  auto M = out.block(1);
  const Eigen::MatrixXd C = w * (E.topRows(nv).transpose() * P + E.bottomRows(nv).transpose() * M);
  P.noalias() -= E.topRows(nv) * C;
  M.noalias() -= E.bottomRows(nv) * C;
}

}  // namespace

NonlinearOperator::NonlinearOperator(const CollisionKernel& kernel, const VelocityGrid& grid, NonlinearOptions options)
    : kernel_(kernel), grid_(grid), options_(options), basis_(kernel_basis(grid)) {
  kernel.validate();
  const std::size_t nv = grid.size();
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  loss_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
  const std::size_t bytes = nv * nv * nv * sizeof(double);
  const bool tensor = bytes <= options.tensor_bytes_cap;
  if (tensor) gain_.assign(nv * nv * nv, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
  for (long l = 0; l < static_cast<long>(nv); ++l) {
    const auto iv = static_cast<std::size_t>(l);
    double* G = tensor ? gain_.data() + iv * nv * nv : nullptr;
    detail::for_each_partner(grid, aq, kernel, iv, [&](std::size_t iu, double K, const Vec3& vp, const Vec3& up) {
      const double w = K * grid.sqrt_maxwellian[iu];
      loss_(static_cast<Eigen::Index>(iv), static_cast<Eigen::Index>(iu)) += w;
      if (!G) return;
      const Stencil sv = trilinear_stencil(vp, grid);
      const Stencil su = trilinear_stencil(up, grid);
      for (int a = 0; a < sv.count; ++a) {
        double* row = G + sv.idx[a] * nv;
        const double wa = w * sv.w[a];
        for (int b = 0; b < su.count; ++b) row[su.idx[b]] += wa * su.w[b];
      }
    });
  }
}

SpeciesPair NonlinearOperator::apply(const SpeciesPair& f, const SpeciesPair& g) const {
  check_shapes(f, g, grid_);
  SpeciesPair out = tensor_backed() ? apply_tensor(f, g) : apply_direct(f, g);
  if (options_.correction == NullSpaceCorrection::Project) project_nodes(out, basis_, grid_.quad_weights[0]);
  out.time_stamp = f.time_stamp;
  return out;
}

SpeciesPair NonlinearOperator::apply_tensor(const SpeciesPair& f, const SpeciesPair& g) const {
  const std::size_t nv = grid_.size();
  const std::size_t nx = f.spatial_nodes();
  const auto nvi = static_cast<Eigen::Index>(nv), nxi = static_cast<Eigen::Index>(nx);
  const Eigen::MatrixXd S = g.block(0) + g.block(1);
  const auto Fp = f.block(0);
  const auto Fm = f.block(1);
  const Eigen::MatrixXd LS = loss_ * S;
  SpeciesPair out(nx, nv);
#pragma omp parallel
  {
    Eigen::MatrixXd H(nvi, nxi);
#pragma omp for schedule(static)
    for (long l = 0; l < static_cast<long>(nv); ++l) {
      const auto iv = static_cast<std::size_t>(l);
      H.noalias() = RowMap(gain_.data() + iv * nv * nv, nvi, nvi) * S;
      for (std::size_t x = 0; x < nx; ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        const double loss = LS(l, xi);
        out.at(0, x, iv) = Fp.col(xi).dot(H.col(xi)) - Fp(l, xi) * loss;
        out.at(1, x, iv) = Fm.col(xi).dot(H.col(xi)) - Fm(l, xi) * loss;
      }
    }
  }
  return out;
}

SpeciesPair NonlinearOperator::apply_direct(const SpeciesPair& f, const SpeciesPair& g) const {
  const std::size_t nx = f.spatial_nodes();
  const std::size_t nv = grid_.size();
  const auto aq = build_angular_quadrature(kernel_.angular_nodes);
  SpeciesPair out(nx, nv);
#pragma omp parallel for schedule(dynamic)
  for (long l = 0; l < static_cast<long>(nx); ++l) {
    const auto x = static_cast<std::size_t>(l);
    const auto r = direct_node(f.slice(0, x).data(), f.slice(1, x).data(), g.slice(0, x).data(),
                               g.slice(1, x).data(), kernel_, grid_, aq);
    for (std::size_t i = 0; i < nv; ++i) {
      out.at(0, x, i) = r(static_cast<Eigen::Index>(i));
      out.at(1, x, i) = r(static_cast<Eigen::Index>(nv + i));
    }
  }
  return out;
}

Eigen::VectorXd nonlinear_T(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const CollisionKernel& kernel,
                            const VelocityGrid& grid, NullSpaceCorrection correction) {
  kernel.validate();
  const std::size_t nv = grid.size();
  if (f.size() != static_cast<Eigen::Index>(2 * nv) || g.size() != f.size())
    throw ShapeError("nonlinear_T: shape mismatch");
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  Eigen::VectorXd out = direct_node(f.data(), f.data() + nv, g.data(), g.data() + nv, kernel, grid, aq);
  if (correction == NullSpaceCorrection::Project) {
    const Eigen::MatrixXd E = kernel_basis(grid);
    out -= E * (grid.quad_weights[0] * (E.transpose() * out));
  }
  return out;
}

SpeciesPair serial::nonlinear_T(const SpeciesPair& f, const SpeciesPair& g, const CollisionKernel& kernel,
                                const VelocityGrid& grid, NullSpaceCorrection correction) {
  kernel.validate();
  check_shapes(f, g, grid);
  const std::size_t nv = grid.size();
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  SpeciesPair out(f.spatial_nodes(), nv);
  for (std::size_t x = 0; x < f.spatial_nodes(); ++x) {
    const auto r = direct_node(f.slice(0, x).data(), f.slice(1, x).data(), g.slice(0, x).data(),
                               g.slice(1, x).data(), kernel, grid, aq);
    for (std::size_t i = 0; i < nv; ++i) {
      out.at(0, x, i) = r(static_cast<Eigen::Index>(i));
      out.at(1, x, i) = r(static_cast<Eigen::Index>(nv + i));
    }
  }
  if (correction == NullSpaceCorrection::Project) project_nodes(out, kernel_basis(grid), grid.quad_weights[0]);
  out.time_stamp = f.time_stamp;
  return out;
}

}  // namespace vmb
