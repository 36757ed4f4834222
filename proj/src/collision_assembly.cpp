#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "collision_detail.hpp"
#include "vmb/collision.hpp"
#include "vmb/errors.hpp"

namespace vmb {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sqrt_maxwellian(const Vec3& v) {
  constexpr double norm = 0.25197943553838073;  // (2 pi)^{-3/4}
  return norm * std::exp(-0.25 * norm2(v));
}

// Row iv of the two blocks X (couples to g+ + g-) and Y (own species):
//   L+ g = (X + Y) g+ + X g-.
// Maxwellian factors are analytic; only g is interpolated at v', u'.
void assemble_row(std::size_t iv, const CollisionKernel& kernel, const VelocityGrid& grid,
                  const AngularQuadrature& aq, RowMatrix& X, RowMatrix& Y) {
  const auto r = static_cast<Eigen::Index>(iv);
  const double smv = grid.sqrt_maxwellian[iv];
  detail::for_each_partner(grid, aq, kernel, iv, [&](std::size_t iu, double K, const Vec3& vp, const Vec3& up) {
    const double smu = grid.sqrt_maxwellian[iu];
    const Stencil su = trilinear_stencil(up, grid);
    const Stencil sv = trilinear_stencil(vp, grid);
    const double gx = K * smu * sqrt_maxwellian(vp);
    for (int c = 0; c < su.count; ++c) X(r, su.idx[c]) -= gx * su.w[c];
    X(r, static_cast<Eigen::Index>(iu)) += K * smv * smu;
    const double gy = 2.0 * K * smu * sqrt_maxwellian(up);
    for (int c = 0; c < sv.count; ++c) Y(r, sv.idx[c]) -= gy * sv.w[c];
    Y(r, r) += 2.0 * K * grid.maxwellian[iu];
  });
}

Eigen::MatrixXd assemble_blocks(const CollisionKernel& kernel, const VelocityGrid& grid, bool parallel) {
  kernel.validate();
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  const auto nv = static_cast<Eigen::Index>(grid.size());
  RowMatrix X = RowMatrix::Zero(nv, nv);
  RowMatrix Y = RowMatrix::Zero(nv, nv);
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (long iv = 0; iv < static_cast<long>(nv); ++iv)
    assemble_row(static_cast<std::size_t>(iv), kernel, grid, aq, X, Y);
  Eigen::MatrixXd L(2 * nv, 2 * nv);
  L.topLeftCorner(nv, nv) = X + Y;
  L.topRightCorner(nv, nv) = X;
  L.bottomLeftCorner(nv, nv) = X;
  L.bottomRightCorner(nv, nv) = X + Y;
  return L;
}

}  // namespace

Eigen::MatrixXd assemble_raw(const CollisionKernel& kernel, const VelocityGrid& grid) {
  return assemble_blocks(kernel, grid, true);
}

Eigen::MatrixXd serial::assemble_raw(const CollisionKernel& kernel, const VelocityGrid& grid) {
  return assemble_blocks(kernel, grid, false);
}

LinearizedOperator assemble_linearized(const CollisionKernel& kernel, const VelocityGrid& grid,
                                       const AssemblyOptions& options) {
  kernel.validate();
  if (grid.size() > options.dof_cap)
    throw ResourceError("dense assembly cap exceeded: " + std::to_string(grid.size()) + " velocity nodes > " +
                        std::to_string(options.dof_cap));
  const Eigen::MatrixXd raw = assemble_raw(kernel, grid);
  const Eigen::MatrixXd E = kernel_basis(grid);
  const double w = grid.quad_weights[0];
  // Conservative correction on both sides: columns (range orthogonal to N)
  // and rows (N annihilated), then symmetrization.
  Eigen::MatrixXd A = raw - w * E * (E.transpose() * raw);
  A -= w * (A * E) * E.transpose();
  const double anorm = A.norm();
  const double asym = (A - A.transpose()).norm() / anorm;
  const double corr = (raw - A).norm() / raw.norm();
  Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  LinearizedOperator op(std::move(S), grid, kernel.gamma);
  op.asymmetry = asym;
  op.correction_norm = corr;
  if (options.measure_coercivity) op.measure_coercivity(grid);
  return op;
}

Eigen::VectorXd linearized_via_q(const Eigen::VectorXd& g, const CollisionKernel& kernel, const VelocityGrid& grid) {
  const std::size_t nv = grid.size();
  if (g.size() != static_cast<Eigen::Index>(2 * nv)) throw ShapeError("linearized_via_q: shape mismatch");
  std::vector<double> sms(nv), smp(nv), smm(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    const double sm = grid.sqrt_maxwellian[i];
    smp[i] = sm * g(static_cast<Eigen::Index>(i));
    smm[i] = sm * g(static_cast<Eigen::Index>(nv + i));
    sms[i] = smp[i] + smm[i];
  }
  const auto a = q_bilinear(grid.maxwellian, sms, kernel, grid);
  const auto bp = q_bilinear(smp, grid.maxwellian, kernel, grid);
  const auto bm = q_bilinear(smm, grid.maxwellian, kernel, grid);
  Eigen::VectorXd out(2 * nv);
  for (std::size_t i = 0; i < nv; ++i) {
    out(static_cast<Eigen::Index>(i)) = -(a[i] + 2.0 * bp[i]);
    out(static_cast<Eigen::Index>(nv + i)) = -(a[i] + 2.0 * bm[i]);
  }
  return out;
}

namespace {
constexpr char kOperatorMagic[4] = {'V', 'M', 'B', 'L'};
constexpr std::uint32_t kOperatorVersion = 1;
}  // namespace

void save_operator(const std::filesystem::path& path, const LinearizedOperator& op) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kOperatorMagic, 4);
  detail::write_le<std::uint32_t>(os, kOperatorVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(op.size()));
  detail::write_le<double>(os, op.gamma());
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(op.points_per_axis()));
  detail::write_le<double>(os, op.v_max());
  const auto& m = op.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::write_le<double>(os, m(i, j));
  if (!os) throw IoError("write failed for " + path.string());
}

LinearizedOperator load_operator(const std::filesystem::path& path, const VelocityGrid& grid) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kOperatorMagic, 4)) throw IoError("not a VMBL file: " + path.string());
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kOperatorVersion) throw IoError("unsupported VMBL version " + std::to_string(version));
  const auto dofs = detail::read_le<std::uint32_t>(is);
  const double gamma = detail::read_le<double>(is);
  const auto n = detail::read_le<std::uint32_t>(is);
  const double vmax = detail::read_le<double>(is);
  if (dofs != 2 * grid.size() || static_cast<int>(n) != grid.points_per_axis || vmax != grid.v_max)
    throw IoError("VMBL header does not match the velocity grid");
  Eigen::MatrixXd m(dofs, dofs);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = detail::read_le<double>(is);
  return LinearizedOperator(std::move(m), grid, gamma);
}

TransportSources transport_sources(const VelocityGrid& grid) {
  const std::size_t nv = grid.size();
  const auto N = static_cast<Eigen::Index>(2 * nv);
  TransportSources s;
  for (auto& x : s.viscous) x = Eigen::VectorXd::Zero(N);
  for (auto& x : s.thermal) x = Eigen::VectorXd::Zero(N);
  for (auto& x : s.electric) x = Eigen::VectorXd::Zero(N);
  for (std::size_t k = 0; k < nv; ++k) {
    const Vec3& v = grid.nodes[k];
    const double sm = grid.sqrt_maxwellian[k];
    const double v2 = norm2(v);
    const auto a = static_cast<Eigen::Index>(k), b = static_cast<Eigen::Index>(nv + k);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double val = (v[i] * v[j] - (i == j ? v2 / 3.0 : 0.0)) * sm;
        s.viscous[3 * i + j](a) = val;
        s.viscous[3 * i + j](b) = val;
      }
      const double th = v[i] * (0.5 * v2 - 2.5) * sm;
      s.thermal[i](a) = th;
      s.thermal[i](b) = th;
      s.electric[i](a) = v[i] * sm;
      s.electric[i](b) = -v[i] * sm;
    }
  }
  return s;
}

TransportSolutions transport_solutions(const LinearizedOperator& op, const VelocityGrid& grid) {
  const auto src = transport_sources(grid);
  TransportSolutions sol;
  for (int i = 0; i < 9; ++i) sol.viscous[i] = op.kerp_solve(src.viscous[i]).phi;
  for (int i = 0; i < 3; ++i) sol.thermal[i] = op.kerp_solve(src.thermal[i]).phi;
  for (int i = 0; i < 3; ++i) sol.electric[i] = op.kerp_solve(src.electric[i]).phi;
  return sol;
}

TransportCoefficients transport_coefficients(const LinearizedOperator& op, const VelocityGrid& grid) {
  const auto src = transport_sources(grid);
  TransportCoefficients tc;
  const auto& E = op.kernel_basis();
  for (const auto& e : src.electric)
    for (Eigen::Index k = 0; k < E.cols(); ++k)
      tc.sigma_source_kernel_overlap = std::max(tc.sigma_source_kernel_overlap, std::abs(op.inner(e, E.col(k))));
  const auto solve = [&](const Eigen::VectorXd& h) {
    auto r = op.kerp_solve(h);
    tc.max_solve_residual = std::max(tc.max_solve_residual, r.residual);
    return op.inner(r.phi, h);
  };
  for (const auto& h : src.viscous) tc.raw_viscous += solve(h);
  for (const auto& h : src.thermal) tc.raw_thermal += solve(h);
  for (const auto& h : src.electric) tc.raw_electric += solve(h);
  tc.mu = tc.norm_viscous * tc.raw_viscous;
  tc.kappa = tc.norm_thermal * tc.raw_thermal;
  tc.sigma = tc.norm_electric * tc.raw_electric;
  std::ostringstream os;
  os << "velocity " << grid.points_per_axis << "^3 v_max=" << grid.v_max << " gamma=" << op.gamma()
     << " mu=(1/20)sum<PhiA,A> kappa=(1/15)sum<PhiB,B> sigma=(1/3)sum<Phis,v sqrtM q1>";
  tc.provenance = os.str();
  if (!(tc.mu > 0.0 && tc.kappa > 0.0 && tc.sigma > 0.0))
    throw SingularSolveError("transport coefficients are not positive");
  return tc;
}

}  // namespace vmb
