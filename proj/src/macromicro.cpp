#include "vmb/macromicro.hpp"

#include "vmb/collision.hpp"
#include "vmb/errors.hpp"

namespace vmb {

namespace {

void check(const SpeciesPair& f, const VelocityGrid& grid) {
  if (f.velocity_nodes() != grid.size()) throw ShapeError("species pair does not match the velocity grid");
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

// Weight columns: sqrt M, v_1..3 sqrt M, (|v|^2/3 - 1) sqrt M, (|v|^2 - 3) sqrt M,
// (|v|^2/5 - 1) sqrt M, all multiplied by the quadrature weight.
enum Col { kMass = 0, kV1 = 1, kTheta3 = 4, kTheta12 = 5, kTheta5 = 6, kCols = 7 };

Eigen::MatrixXd weight_columns(const VelocityGrid& grid) {
  Eigen::MatrixXd W(static_cast<Eigen::Index>(grid.size()), kCols);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double ws = grid.quad_weights[i] * grid.sqrt_maxwellian[i];
    const Vec3& v = grid.nodes[i];
    const double v2 = norm2(v);
    W(r, kMass) = ws;
    for (int d = 0; d < 3; ++d) W(r, kV1 + d) = v[d] * ws;
    W(r, kTheta3) = (v2 / 3.0 - 1.0) * ws;
    W(r, kTheta12) = (v2 - 3.0) * ws;
    W(r, kTheta5) = (v2 / 5.0 - 1.0) * ws;
  }
  return W;
}

}  // namespace

Eigen::MatrixXd species_moments(const SpeciesPair& f, int species, const Eigen::MatrixXd& weights) {
  return f.block(species).transpose() * weights;
}

MacroState macro_state(const SpeciesPair& f, const VelocityGrid& grid) {
  check(f, grid);
  const auto W = weight_columns(grid);
  const Eigen::MatrixXd mp = species_moments(f, 0, W);
  const Eigen::MatrixXd mm = species_moments(f, 1, W);
  const Eigen::MatrixXd sum = mp + mm;
  MacroState m;
  m.rho_plus = column(mp, kMass);
  m.rho_minus = column(mm, kMass);
  for (int d = 0; d < 3; ++d) m.u[d] = column(0.5 * sum, kV1 + d);
  m.theta = column(sum / 12.0, kTheta12);
  return m;
}

SpeciesPair project_P(const SpeciesPair& f, const VelocityGrid& grid) {
  check(f, grid);
  const Eigen::MatrixXd E = kernel_basis(grid);
  const auto nv = static_cast<Eigen::Index>(grid.size());
  const double w = grid.quad_weights[0];
  const Eigen::MatrixXd C = w * (E.topRows(nv).transpose() * f.block(0) + E.bottomRows(nv).transpose() * f.block(1));
  SpeciesPair out(f.spatial_nodes(), grid.size());
  out.block(0).noalias() = E.topRows(nv) * C;
  out.block(1).noalias() = E.bottomRows(nv) * C;
  out.time_stamp = f.time_stamp;
  return out;
}

SpeciesPair micro_part(const SpeciesPair& f, const VelocityGrid& grid) {
  SpeciesPair out = f;
  out.axpy(-1.0, project_P(f, grid));
  return out;
}

FluidMoments fluid_moments(const SpeciesPair& f, double eps, const VelocityGrid& grid) {
  check(f, grid);
  if (!(eps > 0.0)) throw ConfigError("fluid_moments: eps must be positive");
  const auto W = weight_columns(grid);
  const Eigen::MatrixXd mp = species_moments(f, 0, W);
  const Eigen::MatrixXd mm = species_moments(f, 1, W);
  const Eigen::MatrixXd half_sum = 0.5 * (mp + mm);
  const Eigen::MatrixXd diff = mp - mm;
  FluidMoments m;
  m.eps_used = eps;
  m.rho = column(half_sum, kMass);
  m.theta = column(half_sum, kTheta3);
  m.n = column(diff, kMass);
  m.w = column(diff / eps, kTheta3);
  for (int d = 0; d < 3; ++d) {
    m.u[d] = column(half_sum, kV1 + d);
    m.j[d] = column(diff / eps, kV1 + d);
  }
  return m;
}

std::vector<double> charge_density(const SpeciesPair& f, const VelocityGrid& grid) {
  check(f, grid);
  Eigen::VectorXd w(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) w(static_cast<Eigen::Index>(i)) = grid.quad_weights[i] * grid.sqrt_maxwellian[i];
  const Eigen::VectorXd n = f.block(0).transpose() * w - f.block(1).transpose() * w;
  return {n.data(), n.data() + n.size()};
}

VectorField current_density(const SpeciesPair& f, double eps, const VelocityGrid& grid) {
  check(f, grid);
  Eigen::MatrixXd W(static_cast<Eigen::Index>(grid.size()), 3);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int d = 0; d < 3; ++d)
      W(static_cast<Eigen::Index>(i), d) = grid.quad_weights[i] * grid.sqrt_maxwellian[i] * grid.nodes[i][d] / eps;
  const Eigen::MatrixXd j = species_moments(f, 0, W) - species_moments(f, 1, W);
  return {column(j, 0), column(j, 1), column(j, 2)};
}

VectorField limit_velocity(const SpeciesPair& f, const VelocityGrid& grid) {
  return fluid_moments(f, 1.0, grid).u;
}

std::vector<double> limit_temperature(const SpeciesPair& f, const VelocityGrid& grid) {
  check(f, grid);
  const auto W = weight_columns(grid);
  const Eigen::MatrixXd sum = species_moments(f, 0, W) + species_moments(f, 1, W);
  return column(0.5 * sum, kTheta5);
}

Eigen::Matrix3d moment_A(std::span<const double> f, const VelocityGrid& grid, TraceConvention convention) {
  if (f.size() != grid.size()) throw ShapeError("moment_A: size mismatch");
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ws = grid.quad_weights[i] * grid.sqrt_maxwellian[i] * f[i];
    const Vec3& v = grid.nodes[i];
    for (int m = 0; m < 3; ++m)
      for (int j = 0; j < 3; ++j) {
        const double c = convention == TraceConvention::Verbatim ? 1.0 : (m == j ? 1.0 : 0.0);
        A(m, j) += (v[m] * v[j] - c) * ws;
      }
  }
  return A;
}

Eigen::Vector3d moment_B(std::span<const double> f, const VelocityGrid& grid) {
  if (f.size() != grid.size()) throw ShapeError("moment_B: size mismatch");
  Eigen::Vector3d B = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3& v = grid.nodes[i];
    const double ws = grid.quad_weights[i] * grid.sqrt_maxwellian[i] * f[i] * (norm2(v) - 5.0) / 10.0;
    for (int j = 0; j < 3; ++j) B(j) += v[j] * ws;
  }
  return B;
}

VectorField g_vector(const SpeciesPair& f, const VelocityGrid& grid) {
  const SpeciesPair micro = micro_part(f, grid);
  Eigen::MatrixXd W(static_cast<Eigen::Index>(grid.size()), 3);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int d = 0; d < 3; ++d)
      W(static_cast<Eigen::Index>(i), d) = grid.quad_weights[i] * grid.sqrt_maxwellian[i] * grid.nodes[i][d];
  const Eigen::MatrixXd G = species_moments(micro, 0, W) - species_moments(micro, 1, W);
  return {column(G, 0), column(G, 1), column(G, 2)};
}

double phase_inner(const SpeciesPair& a, const SpeciesPair& b, const VelocityGrid& grid) {
  if (!a.same_shape(b)) throw ShapeError("phase_inner: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s * grid.quad_weights[0];
}

}  // namespace vmb
