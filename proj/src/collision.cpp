#include "vmb/collision.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "collision_detail.hpp"
#include "vmb/errors.hpp"

namespace vmb {

double CollisionKernel::angular_bound() const {
  return angular_profile == AngularProfile::AbsCos ? scale : std::numeric_limits<double>::infinity();
}

void CollisionKernel::validate() const {
  if (noncutoff) throw UnsupportedKernelError("unsupported singular kernel: non-cutoff angular profile");
  if (!(gamma >= -1.0 && gamma < 0.0)) throw UnsupportedKernelError("kinetic exponent gamma must lie in [-1, 0)");
  if (angular_nodes < 2) throw UnsupportedKernelError("angular quadrature needs at least 2 nodes");
  if (!(scale > 0.0)) throw UnsupportedKernelError("angular scale must be positive");
}

std::string CollisionKernel::describe() const {
  std::ostringstream os;
  os << "gamma=" << gamma << " b=" << (angular_profile == AngularProfile::AbsCos ? "abs_cos" : "constant")
     << " scale=" << scale << " angular_nodes=" << angular_nodes;
  return os.str();
}

AngularQuadrature build_angular_quadrature(int nodes) {
  int polar = 1;
  for (int d = 1; d * d * 2 <= nodes; ++d)
    if (nodes % d == 0) polar = d;
  if (polar < 2) throw UnsupportedKernelError("angular_nodes must factor as p x q with 2 <= p <= sqrt(nodes/2)");
  const int azimuth = nodes / polar;

  // Golub-Welsch for Gauss-Legendre nodes on [-1, 1].
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(polar, polar);
  for (int i = 1; i < polar; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  AngularQuadrature q;
  q.polar_nodes = polar;
  q.azimuth_nodes = azimuth;
  for (int i = 0; i < polar; ++i) {
    const double mu = es.eigenvalues()(i);
    const double wmu = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    for (int j = 0; j < azimuth; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + 0.5) / azimuth;
      q.nodes.push_back({s * std::cos(phi), s * std::sin(phi), mu});
      q.weights.push_back(wmu * 2.0 * std::numbers::pi / azimuth);
    }
  }
  return q;
}

std::pair<Vec3, Vec3> post_collision_velocities(const Vec3& v, const Vec3& u, const Vec3& omega) {
  const double zw = (v[0] - u[0]) * omega[0] + (v[1] - u[1]) * omega[1] + (v[2] - u[2]) * omega[2];
  return {Vec3{v[0] - zw * omega[0], v[1] - zw * omega[1], v[2] - zw * omega[2]},
          Vec3{u[0] + zw * omega[0], u[1] + zw * omega[1], u[2] + zw * omega[2]}};
}

Stencil trilinear_stencil(const Vec3& p, const VelocityGrid& grid) {
  const int n = grid.points_per_axis;
  std::array<int, 3> i0{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double s = p[a] / grid.spacing + 0.5 * n - 0.5;
    const double f = std::floor(s);
    i0[a] = static_cast<int>(f);
    t[a] = s - f;
  }
  Stencil st;
  for (int c = 0; c < 8; ++c) {
    double w = 1.0;
    std::array<int, 3> id{};
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const int bit = (c >> (2 - a)) & 1;
      id[a] = i0[a] + bit;
      w *= bit ? t[a] : 1.0 - t[a];
      if (id[a] < 0 || id[a] >= n) inside = false;
    }
    if (!inside || w == 0.0) continue;
    st.idx[st.count] = static_cast<std::uint32_t>(grid.index(id[0], id[1], id[2]));
    st.w[st.count] = w;
    ++st.count;
  }
  return st;
}

namespace {

void check_pair(std::span<const double> F, std::span<const double> G, const VelocityGrid& grid) {
  if (F.size() != grid.size() || G.size() != grid.size()) throw ShapeError("q_bilinear: size mismatch");
}

double q_at(std::size_t iv, std::span<const double> F, std::span<const double> G, const CollisionKernel& kernel,
            const VelocityGrid& grid, const AngularQuadrature& aq) {
  double gain = 0.0, loss = 0.0;
  const double Fv = F[iv];
  detail::for_each_partner(grid, aq, kernel, iv, [&](std::size_t iu, double K, const Vec3& vp, const Vec3& up) {
    gain += K * interpolate(F, trilinear_stencil(vp, grid)) * interpolate(G, trilinear_stencil(up, grid));
    loss += K * Fv * G[iu];
  });
  return gain - loss;
}

}  // namespace

std::vector<double> q_bilinear(std::span<const double> F, std::span<const double> G, const CollisionKernel& kernel,
                               const VelocityGrid& grid) {
  kernel.validate();
  check_pair(F, G, grid);
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  std::vector<double> out(grid.size());
  const long nv = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long iv = 0; iv < nv; ++iv) out[static_cast<std::size_t>(iv)] = q_at(static_cast<std::size_t>(iv), F, G, kernel, grid, aq);
  return out;
}

std::vector<double> serial::q_bilinear(std::span<const double> F, std::span<const double> G,
                                       const CollisionKernel& kernel, const VelocityGrid& grid) {
  kernel.validate();
  check_pair(F, G, grid);
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  std::vector<double> out(grid.size());
  for (std::size_t iv = 0; iv < grid.size(); ++iv) out[iv] = q_at(iv, F, G, kernel, grid, aq);
  return out;
}

std::vector<double> q_loss(std::span<const double> F, std::span<const double> G, const CollisionKernel& kernel,
                           const VelocityGrid& grid) {
  kernel.validate();
  check_pair(F, G, grid);
  const auto aq = build_angular_quadrature(kernel.angular_nodes);
  std::vector<double> out(grid.size());
  const long nv = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long iv = 0; iv < nv; ++iv) {
    double loss = 0.0;
    const auto i = static_cast<std::size_t>(iv);
    detail::for_each_partner(grid, aq, kernel, i,
                             [&](std::size_t iu, double K, const Vec3&, const Vec3&) { loss += K * G[iu]; });
    out[i] = F[i] * loss;
  }
  return out;
}

namespace {
std::array<double, 5> invariants(const Vec3& v) { return {1.0, v[0], v[1], v[2], norm2(v)}; }
}  // namespace

std::array<double, 5> collision_moments(std::span<const double> q, const VelocityGrid& grid) {
  std::array<double, 5> m{};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto psi = invariants(grid.nodes[i]);
    for (int k = 0; k < 5; ++k) m[k] += grid.quad_weights[i] * psi[k] * q[i];
  }
  return m;
}

std::vector<double> conservative_correction(std::span<const double> q, const VelocityGrid& grid) {
  if (q.size() != grid.size()) throw ShapeError("conservative_correction: size mismatch");
  Eigen::Matrix<double, 5, 5> gram = Eigen::Matrix<double, 5, 5>::Zero();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto psi = invariants(grid.nodes[i]);
    const double wm = grid.quad_weights[i] * grid.maxwellian[i];
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) gram(j, k) += wm * psi[j] * psi[k];
  }
  const auto solver = gram.ldlt();
  std::vector<double> out(q.begin(), q.end());
  // Two passes push the residual moments to round-off.
  for (int pass = 0; pass < 2; ++pass) {
    const auto m = collision_moments(out, grid);
    const Eigen::Matrix<double, 5, 1> c = solver.solve(Eigen::Map<const Eigen::Matrix<double, 5, 1>>(m.data()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto psi = invariants(grid.nodes[i]);
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += c(k) * psi[k];
      out[i] -= s * grid.maxwellian[i];
    }
  }
  return out;
}

Eigen::MatrixXd kernel_basis(const VelocityGrid& grid) {
  const std::size_t nv = grid.size();
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * nv), 6);
  for (std::size_t i = 0; i < nv; ++i) {
    const double sm = grid.sqrt_maxwellian[i];
    const Vec3& v = grid.nodes[i];
    const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(nv + i);
    E(a, 0) = sm;
    E(b, 1) = sm;
    for (int d = 0; d < 3; ++d) {
      E(a, 2 + d) = v[d] * sm;
      E(b, 2 + d) = v[d] * sm;
    }
    E(a, 5) = norm2(v) * sm;
    E(b, 5) = norm2(v) * sm;
  }
  const double w = grid.quad_weights[0];
  for (int pass = 0; pass < 2; ++pass)
    for (int k = 0; k < 6; ++k) {
      for (int j = 0; j < k; ++j) E.col(k) -= w * E.col(j).dot(E.col(k)) * E.col(j);
      E.col(k) /= std::sqrt(w * E.col(k).squaredNorm());
    }
  return E;
}

LinearizedOperator::LinearizedOperator(Eigen::MatrixXd matrix, const VelocityGrid& grid, double gamma)
    : nv_(grid.size()),
      n_axis_(grid.points_per_axis),
      v_max_(grid.v_max),
      gamma_(gamma),
      weight_(grid.quad_weights[0]),
      matrix_(std::move(matrix)),
      basis_(vmb::kernel_basis(grid)) {
  if (matrix_.rows() != static_cast<Eigen::Index>(2 * nv_) || matrix_.cols() != matrix_.rows())
    throw ShapeError("LinearizedOperator: matrix does not match the velocity grid");
}

Eigen::VectorXd LinearizedOperator::apply(const Eigen::VectorXd& g) const {
  if (g.size() != matrix_.cols()) throw ShapeError("linearized_apply: shape mismatch");
  return matrix_ * g;
}

std::shared_ptr<const Eigen::MatrixXd> LinearizedOperator::shifted_inverse(double lambda) const {
  std::lock_guard lock(cache_->mutex);
  if (auto it = cache_->inverses.find(lambda); it != cache_->inverses.end()) return it->second;
  const auto n = matrix_.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + lambda * matrix_;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw SingularSolveError("factorization of I + lambda L failed");
  auto inv = std::make_shared<const Eigen::MatrixXd>(llt.solve(Eigen::MatrixXd::Identity(n, n)));
  cache_->inverses.emplace(lambda, inv);
  return inv;
}

Eigen::VectorXd LinearizedOperator::project_perp(const Eigen::VectorXd& h) const {
  return h - basis_ * (weight_ * (basis_.transpose() * h));
}

LinearizedOperator::KerpResult LinearizedOperator::kerp_solve(const Eigen::VectorXd& h) const {
  if (h.size() != matrix_.rows()) throw ShapeError("kerp_solve: shape mismatch");
  if (coercivity_delta && *coercivity_delta <= 1e-12)
    throw SingularSolveError("kerp_solve: coercivity below threshold");
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> llt;
  {
    std::lock_guard lock(cache_->mutex);
    if (!cache_->regularized) {
      const double shift = matrix_.diagonal().mean();
      Eigen::MatrixXd R = matrix_ + shift * weight_ * basis_ * basis_.transpose();
      auto f = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(R);
      if (f->info() != Eigen::Success) throw SingularSolveError("kerp_solve: operator is not positive on ker^perp");
      cache_->regularized = f;
    }
    llt = cache_->regularized;
  }
  KerpResult r;
  const double hn = std::sqrt(inner(h, h));
  const Eigen::VectorXd hp = project_perp(h);
  r.projected = std::sqrt(inner(h - hp, h - hp)) > 1e-8 * std::max(hn, 1e-300);
  r.phi = llt->solve(hp);
  r.phi = project_perp(r.phi);
  const Eigen::VectorXd res = matrix_ * r.phi - hp;
  r.residual = hn > 0.0 ? std::sqrt(inner(res, res)) / hn : 0.0;
  if (r.residual > 1e-8) throw SingularSolveError("kerp_solve: residual above 1e-8");
  return r;
}

double LinearizedOperator::measure_coercivity(const VelocityGrid& grid) {
  const auto n = matrix_.rows();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis_);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Z = Q.rightCols(n - basis_.cols());
  Eigen::VectorXd nu(n);
  for (std::size_t i = 0; i < nv_; ++i) {
    const double wgt = std::pow(grid.bracket_v[i], gamma_);
    nu(static_cast<Eigen::Index>(i)) = wgt;
    nu(static_cast<Eigen::Index>(nv_ + i)) = wgt;
  }
  const Eigen::MatrixXd A = Z.transpose() * matrix_ * Z;
  const Eigen::MatrixXd B = Z.transpose() * nu.asDiagonal() * Z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SingularSolveError("coercivity eigen-solve failed");
  coercivity_delta = es.eigenvalues().minCoeff();
  return *coercivity_delta;
}

}  // namespace vmb
