#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vmb/collision.hpp"
#include "vmb/errors.hpp"
#include "vmb/nonlinear.hpp"

using namespace vmb;

namespace {

CollisionKernel test_kernel() {
  CollisionKernel k;
  k.gamma = -1.0;
  k.angular_nodes = 16;
  return k;
}

const VelocityGrid& grid4() {
  static const auto g = build_velocity_grid(4, 6.0);
  return g;
}
const VelocityGrid& grid6() {
  static const auto g = build_velocity_grid(6, 6.0);
  return g;
}
const LinearizedOperator& op6() {
  static const auto op = assemble_linearized(test_kernel(), grid6());
  return op;
}

Eigen::VectorXd random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = N(rng);
  return v;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("post-collision velocities") {
  const Vec3 v{1.0, 0.0, 0.0}, u{0.0, 0.0, 0.0};
  const double r = 1.0 / std::sqrt(2.0);
  const auto [vp, up] = post_collision_velocities(v, u, {r, r, 0.0});
  CHECK(vp[0] == doctest::Approx(0.5));
  CHECK(vp[1] == doctest::Approx(-0.5));
  CHECK(up[0] == doctest::Approx(0.5));
  CHECK(up[1] == doctest::Approx(0.5));
  CHECK(std::abs(vp[2]) + std::abs(up[2]) == 0.0);

  const auto [same_v, same_u] = post_collision_velocities({0.3, -1.0, 2.0}, {0.3, -1.0, 2.0}, {0.0, 0.0, 1.0});
  CHECK(same_v == Vec3{0.3, -1.0, 2.0});
  CHECK(same_u == Vec3{0.3, -1.0, 2.0});

  const auto [xv, xu] = post_collision_velocities({2.0, 1.0, 0.0}, {0.0, 1.0, 0.0}, {1.0, 0.0, 0.0});
  CHECK(xv == Vec3{0.0, 1.0, 0.0});
  CHECK(xu == Vec3{2.0, 1.0, 0.0});

  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 a{N(rng), N(rng), N(rng)}, b{N(rng), N(rng), N(rng)};
    Vec3 w{N(rng), N(rng), N(rng)};
    const double nw = std::sqrt(norm2(w));
    for (double& c : w) c /= nw;
    const auto [ap, bp] = post_collision_velocities(a, b, w);
    for (int d = 0; d < 3; ++d) CHECK(ap[d] + bp[d] == doctest::Approx(a[d] + b[d]).epsilon(1e-13));
    CHECK(std::abs(norm2(ap) + norm2(bp) - norm2(a) - norm2(b)) <= 1e-12 * (1.0 + norm2(a) + norm2(b)));
  }
}

TEST_CASE("angular quadrature integrates the sphere") {
  const auto aq = build_angular_quadrature(16);
  double s = 0.0, c2 = 0.0;
  for (std::size_t i = 0; i < aq.nodes.size(); ++i) {
    s += aq.weights[i];
    c2 += aq.weights[i] * aq.nodes[i][2] * aq.nodes[i][2];
    CHECK(norm2(aq.nodes[i]) == doctest::Approx(1.0));
  }
  CHECK(s == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
  CHECK(c2 == doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-12));
}

namespace {

// Hat-function interpolation with zero extension, written per axis.
double hat_interp(std::span<const double> g, const VelocityGrid& grid, const Vec3& p) {
  const int n = grid.points_per_axis;
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = grid.index(i, j, k);
        double w = 1.0;
        for (int a = 0; a < 3; ++a) w *= std::max(0.0, 1.0 - std::abs(p[a] - grid.nodes[idx][a]) / grid.spacing);
        acc += w * g[idx];
      }
  return acc;
}

struct Split {
  double gain = 0.0, loss = 0.0;
};

Split oracle_q(std::span<const double> F, std::span<const double> G, const CollisionKernel& k,
               const VelocityGrid& grid, std::size_t iv) {
  const auto aq = build_angular_quadrature(k.angular_nodes);
  const Vec3 v = grid.nodes[iv];
  Split s;
  for (std::size_t iu = 0; iu < grid.size(); ++iu) {
    if (iu == iv) continue;
    const Vec3 u = grid.nodes[iu];
    const Vec3 z{v[0] - u[0], v[1] - u[1], v[2] - u[2]};
    const double r = std::sqrt(norm2(z));
    for (std::size_t a = 0; a < aq.nodes.size(); ++a) {
      const auto [vp, up] = post_collision_velocities(v, u, aq.nodes[a]);
      const double K = std::pow(r, k.gamma) * std::abs(dot(z, aq.nodes[a]) / r) * aq.weights[a] * grid.quad_weights[iu];
      s.gain += K * hat_interp(F, grid, vp) * hat_interp(G, grid, up);
      s.loss += K * F[iv] * G[iu];
    }
  }
  return s;
}

double relative_qmm(int points) {
  const auto g = build_velocity_grid(points, 6.0);
  const auto k = test_kernel();
  const auto q = q_bilinear(g.maxwellian, g.maxwellian, k, g);
  const auto l = q_loss(g.maxwellian, g.maxwellian, k, g);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    a += g.quad_weights[i] * q[i] * q[i];
    b += g.quad_weights[i] * l[i] * l[i];
  }
  return std::sqrt(a / b);
}

}  // namespace

TEST_CASE("bilinear operator against a direct quadrature oracle") {
  const auto g = build_velocity_grid(6, 6.0);
  const auto k = test_kernel();
  std::vector<double> F(g.size()), G(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    F[i] = g.maxwellian[i] * (1.0 + 0.3 * g.nodes[i][0]);
    G[i] = g.maxwellian[i] * (1.0 - 0.2 * g.nodes[i][2] + 0.1 * norm2(g.nodes[i]));
  }
  const auto q = q_bilinear(F, G, k, g);
  const auto l = q_loss(F, G, k, g);
  for (std::size_t iv : {std::size_t{0}, g.index(2, 3, 2), g.index(5, 1, 4)}) {
    const auto o = oracle_q(F, G, k, g, iv);
    CHECK(l[iv] == doctest::Approx(o.loss).epsilon(1e-12));
    CHECK(q[iv] == doctest::Approx(o.gain - o.loss).epsilon(1e-11));
  }
}

TEST_CASE("bilinear operator") {
  const auto g = build_velocity_grid(8, 6.0);
  const auto k = test_kernel();

  // Maxwellian equilibrium: the defect is trilinear interpolation error and
  // shrinks under refinement.
  const double r8 = relative_qmm(8), r12 = relative_qmm(12);
  CHECK(r8 < 0.35);
  CHECK(r12 < 0.75 * r8);

  const std::vector<double> zero(g.size(), 0.0);
  CHECK(max_abs(q_bilinear(g.maxwellian, zero, k, g)) == 0.0);

  std::vector<double> F(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    F[i] = g.maxwellian[i] * (1.0 + 0.3 * g.nodes[i][0] + 0.1 * (norm2(g.nodes[i]) - 3.0));
  const auto q = q_bilinear(F, F, k, g);
  const auto raw = collision_moments(q, g);
  // Transverse momenta vanish by the mirror symmetry of F and the grid.
  CHECK(std::abs(raw[2]) <= 1e-14);
  CHECK(std::abs(raw[3]) <= 1e-14);
  const auto fixed = collision_moments(conservative_correction(q, g), g);
  for (double m : fixed) CHECK(std::abs(m) <= 1e-12);

  CHECK(max_abs(serial::q_bilinear(F, F, k, g)) == doctest::Approx(max_abs(q)).epsilon(1e-14));

  auto bad = k;
  bad.noncutoff = NoncutoffParams{};
  CHECK_THROWS_AS(q_bilinear(F, F, bad, g), UnsupportedKernelError);
}

TEST_CASE("conservative correction") {
  const auto& g = grid4();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> r(g.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = N(rng) * g.sqrt_maxwellian[i];
  const auto c = conservative_correction(r, g);
  for (double m : collision_moments(c, g)) CHECK(std::abs(m) <= 1e-12);
  const auto again = conservative_correction(c, g);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(again[i] - c[i]) <= 1e-12);
  for (double m : collision_moments(conservative_correction(g.maxwellian, g), g)) CHECK(std::abs(m) <= 1e-12);
}

TEST_CASE("linearized operator structure") {
  const auto& g = grid4();
  const auto op = assemble_linearized(test_kernel(), g);
  CHECK(op.matrix().rows() == 128);
  CHECK(op.matrix().cols() == 128);
  const double mnorm = op.matrix().norm();
  const Eigen::MatrixXd& basis = op.kernel_basis();
  CHECK(basis.cols() == 6);
  CHECK((op.matrix() * basis).norm() <= 1e-10 * mnorm);
  // Orthonormal in the quadrature inner product.
  const Eigen::MatrixXd gram = op.weight() * basis.transpose() * basis;
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-12);

  const auto op2 = assemble_linearized(test_kernel(), g);
  CHECK(op2.matrix() == op.matrix());

  AssemblyOptions tight;
  tight.dof_cap = 32;
  CHECK_THROWS_AS(assemble_linearized(test_kernel(), g, tight), ResourceError);
}

TEST_CASE("linearized operator: symmetry, positivity, range") {
  const auto& g = grid6();
  const auto& op = op6();
  const double mnorm = op.matrix().norm();
  REQUIRE(op.coercivity_delta.has_value());
  CHECK(*op.coercivity_delta > 0.0);

  Eigen::VectorXd nu(static_cast<Eigen::Index>(op.size()));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < g.size(); ++i)
      nu(static_cast<Eigen::Index>(s * g.size() + i)) = std::pow(g.bracket_v[i], -0.5);  // <v>^{gamma/2}

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto x = random_vector(op.size(), seed);
    const auto y = random_vector(op.size(), seed + 1000);
    const auto Lx = op.apply(x);
    const double xLx = op.inner(Lx, x);
    CHECK(xLx >= 0.0);
    const auto perp = op.project_perp(x);
    const double nu_norm = op.inner(nu.cwiseProduct(perp), nu.cwiseProduct(perp));
    CHECK(xLx >= (1.0 - 1e-9) * *op.coercivity_delta * nu_norm);
    CHECK(std::abs(op.inner(Lx, y) - op.inner(x, op.apply(y))) <= 1e-10 * mnorm * x.norm() * y.norm() * op.weight());
    for (Eigen::Index c = 0; c < 6; ++c) CHECK(std::abs(op.inner(Lx, op.kernel_basis().col(c))) <= 1e-10 * mnorm * x.norm());
  }
}

TEST_CASE("assembled matrix agrees with direct evaluation") {
  const auto& g = grid4();
  const auto k = test_kernel();
  const auto op = assemble_linearized(k, g);
  // Compare only away from the null space, where the assembled matrix had its
  // correction applied.
  const auto x = op.project_perp(random_vector(op.size(), 3));
  const Eigen::VectorXd direct = linearized_via_q(x, k, g);
  Eigen::VectorXd assembled = op.apply(x);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < g.size(); ++i) assembled(static_cast<Eigen::Index>(s * g.size() + i)) *= g.sqrt_maxwellian[i];
  const auto dperp = direct;
  CHECK((assembled - dperp).norm() <= 0.2 * dperp.norm());
}

TEST_CASE("ker-perp solves") {
  const auto& op = op6();
  const auto g0 = op.project_perp(random_vector(op.size(), 21));
  const auto r = op.kerp_solve(op.apply(g0));
  CHECK((r.phi - g0).norm() <= 1e-6 * g0.norm());
  CHECK(r.residual <= 1e-8);

  const auto in_null = op.kerp_solve(op.kernel_basis().col(2));
  CHECK(in_null.phi.norm() <= 1e-10);
  CHECK(in_null.projected);

  const auto src = transport_sources(grid6());
  const auto a = op.kerp_solve(src.viscous[1]);
  CHECK(a.residual <= 1e-8);
  for (Eigen::Index c = 0; c < 6; ++c) CHECK(std::abs(op.inner(a.phi, op.kernel_basis().col(c))) <= 1e-10);
}

TEST_CASE("transport coefficients") {
  const auto& g = grid4();
  const auto op = assemble_linearized(test_kernel(), g);
  const auto tc = transport_coefficients(op, g);
  CHECK(tc.mu > 0.0);
  CHECK(tc.kappa > 0.0);
  CHECK(tc.sigma > 0.0);
  CHECK(tc.sigma_source_kernel_overlap <= 1e-12);

  const auto src = transport_sources(g);
  for (const auto& e : src.electric)
    for (Eigen::Index c = 0; c < 6; ++c) CHECK(std::abs(op.inner(e, op.kernel_basis().col(c))) <= 1e-12);

  auto doubled = test_kernel();
  doubled.scale = 2.0;
  const auto op2 = assemble_linearized(doubled, g);
  const auto tc2 = transport_coefficients(op2, g);
  CHECK(tc2.mu == doctest::Approx(0.5 * tc.mu).epsilon(1e-6));
  CHECK(tc2.kappa == doctest::Approx(0.5 * tc.kappa).epsilon(1e-6));
  CHECK(tc2.sigma == doctest::Approx(0.5 * tc.sigma).epsilon(1e-6));
}

TEST_CASE("operator cache round trip") {
  const auto& g = grid4();
  const auto op = assemble_linearized(test_kernel(), g);
  const auto path = std::filesystem::temp_directory_path() / "vmb_test_op.bin";
  save_operator(path, op);
  const auto back = load_operator(path, g);
  CHECK(back.matrix() == op.matrix());
  CHECK(back.gamma() == op.gamma());
  CHECK_THROWS(load_operator(path, build_velocity_grid(6, 6.0)));
  std::filesystem::remove(path);
}

TEST_CASE("nonlinear term") {
  const auto& g = grid4();
  const auto k = test_kernel();
  const auto nv = static_cast<Eigen::Index>(g.size());
  const auto f = random_vector(2 * g.size(), 8);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * nv);
  CHECK(nonlinear_T(f, zero, k, g).norm() == 0.0);

  const auto t = nonlinear_T(f, f, k, g);
  // Total mass, momentum and energy of T q2 vanish.
  std::array<double, 5> m{};
  for (int s = 0; s < 2; ++s) {
    std::vector<double> part(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) part[i] = t(s * nv + static_cast<Eigen::Index>(i)) * g.sqrt_maxwellian[i];
    const auto ms = collision_moments(part, g);
    for (int c = 0; c < 5; ++c) m[c] += ms[c];
  }
  for (double x : m) CHECK(std::abs(x) <= 1e-12 * f.squaredNorm());

  // Maxwellian pair perturbation: sqrt(M) q2 / 2 relaxes to zero up to quadrature error.
  Eigen::VectorXd eq(2 * nv);
  for (std::size_t i = 0; i < g.size(); ++i) eq(static_cast<Eigen::Index>(i)) = eq(nv + static_cast<Eigen::Index>(i)) = 0.5 * g.sqrt_maxwellian[i];
  const auto te = nonlinear_T(eq, eq, k, g);
  const auto loss_scale = q_loss(g.maxwellian, g.maxwellian, k, g);
  double sc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) sc = std::max(sc, std::abs(loss_scale[i]) / g.sqrt_maxwellian[i]);
  CHECK(te.cwiseAbs().maxCoeff() <= 0.1 * sc);

  // The batched operator matches the per-node quadrature.
  SpeciesPair F(3, g.size()), G(3, g.size());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto& x : F.values()) x = N(rng);
  for (auto& x : G.values()) x = N(rng);
  const NonlinearOperator tensor(k, g);
  NonlinearOptions direct_opts;
  direct_opts.tensor_bytes_cap = 0;
  const NonlinearOperator direct(k, g, direct_opts);
  CHECK(tensor.tensor_backed());
  CHECK_FALSE(direct.tensor_backed());
  const auto a = tensor.apply(F, G);
  const auto b = direct.apply(F, G);
  const auto c = serial::nonlinear_T(F, G, k, g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-10).scale(1.0));
    CHECK(a.values()[i] == doctest::Approx(c.values()[i]).epsilon(1e-10).scale(1.0));
  }
}
