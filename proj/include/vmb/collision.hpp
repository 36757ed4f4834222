#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vmb/grid.hpp"

namespace vmb {

enum class AngularProfile { AbsCos, Constant };

// Non-cutoff symbols are carried for metadata only; any kernel holding them
// is rejected by the quadrature routines.
struct NoncutoffParams {
  double s = 0.5;
  double c_b = 1.0;
  double c_phi = 1.0;
};

struct CollisionKernel {
  double gamma = -1.0;
  AngularProfile angular_profile = AngularProfile::AbsCos;
  int angular_nodes = 32;
  double scale = 1.0;  // multiplies b
  std::optional<NoncutoffParams> noncutoff;

  // C in b(cos) <= C |cos|; infinite for the constant profile.
  double angular_bound() const;
  double b(double cos_theta) const {
    return angular_profile == AngularProfile::AbsCos ? scale * std::abs(cos_theta) : scale;
  }
  void validate() const;
  std::string describe() const;
};

struct AngularQuadrature {
  int polar_nodes = 0;
  int azimuth_nodes = 0;
  std::vector<Vec3> nodes;
  std::vector<double> weights;  // sum to 4 pi
};

// Gauss-Legendre in cos(polar) times uniform azimuth.
AngularQuadrature build_angular_quadrature(int nodes);

std::pair<Vec3, Vec3> post_collision_velocities(const Vec3& v, const Vec3& u, const Vec3& omega);

// Trilinear interpolation stencil with zero extension outside the cube.
struct Stencil {
  std::array<std::uint32_t, 8> idx{};
  std::array<double, 8> w{};
  int count = 0;
};
Stencil trilinear_stencil(const Vec3& p, const VelocityGrid& grid);
inline double interpolate(std::span<const double> g, const Stencil& s) {
  double r = 0.0;
  for (int i = 0; i < s.count; ++i) r += s.w[i] * g[s.idx[i]];
  return r;
}

// Bilinear cutoff operator by direct quadrature, OpenMP over output nodes.
std::vector<double> q_bilinear(std::span<const double> F, std::span<const double> G,
                               const CollisionKernel& kernel, const VelocityGrid& grid);
// Loss part only, F(v) * sum K G(u); used as the scale for relative checks.
std::vector<double> q_loss(std::span<const double> F, std::span<const double> G,
                           const CollisionKernel& kernel, const VelocityGrid& grid);

namespace serial {
std::vector<double> q_bilinear(std::span<const double> F, std::span<const double> G,
                               const CollisionKernel& kernel, const VelocityGrid& grid);
}

// Removes mass, momentum and energy: subtracts sum_k c_k psi_k M with the c_k
// fixed by zero moments, i.e. the orthogonal projection in the M^{-1}
// weighted quadrature inner product.
std::vector<double> conservative_correction(std::span<const double> q, const VelocityGrid& grid);

// Moments (mass, momentum, energy) of a single-species velocity function.
std::array<double, 5> collision_moments(std::span<const double> q, const VelocityGrid& grid);

// Orthonormal basis (quadrature inner product) of the two-species null space,
// stored as columns of a (2 nv) x 6 matrix, species-stacked [g+, g-].
Eigen::MatrixXd kernel_basis(const VelocityGrid& grid);

class LinearizedOperator {
 public:
  LinearizedOperator(Eigen::MatrixXd matrix, const VelocityGrid& grid, double gamma);

  std::size_t velocity_dofs() const { return nv_; }
  std::size_t size() const { return 2 * nv_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& kernel_basis() const { return basis_; }
  double weight() const { return weight_; }
  double gamma() const { return gamma_; }
  int points_per_axis() const { return n_axis_; }
  double v_max() const { return v_max_; }

  double asymmetry = 0.0;        // ||A - A^T||_F / ||A||_F before symmetrization
  double correction_norm = 0.0;  // ||A_raw - Pi A_raw Pi||_F / ||A_raw||_F
  std::optional<double> coercivity_delta;

  Eigen::VectorXd apply(const Eigen::VectorXd& g) const;
  // (I + lambda L)^{-1}, dense, cached by lambda.
  std::shared_ptr<const Eigen::MatrixXd> shifted_inverse(double lambda) const;
  // Orthogonal projection onto ker(L)^perp in the quadrature inner product.
  Eigen::VectorXd project_perp(const Eigen::VectorXd& h) const;
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return weight_ * a.dot(b); }

  struct KerpResult {
    Eigen::VectorXd phi;
    double residual = 0.0;  // ||L phi - Pi h|| / ||h||
    bool projected = false; // input had a null-space component above 1e-8
  };
  KerpResult kerp_solve(const Eigen::VectorXd& h) const;

  // Smallest generalized Ritz value of <L g, g> / ||<v>^{gamma/2} g||^2 on
  // ker^perp; stored in coercivity_delta.
  double measure_coercivity(const VelocityGrid& grid);

 private:
  std::size_t nv_;
  int n_axis_;
  double v_max_;
  double gamma_;
  double weight_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd basis_;
  struct Cache {
    std::mutex mutex;
    std::map<double, std::shared_ptr<const Eigen::MatrixXd>> inverses;
    std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> regularized;
  };
  std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

struct AssemblyOptions {
  std::size_t dof_cap = 12 * 12 * 12;  // per species
  bool measure_coercivity = true;
};

LinearizedOperator assemble_linearized(const CollisionKernel& kernel, const VelocityGrid& grid,
                                       const AssemblyOptions& options = {});
namespace serial {
Eigen::MatrixXd assemble_raw(const CollisionKernel& kernel, const VelocityGrid& grid);
}
Eigen::MatrixXd assemble_raw(const CollisionKernel& kernel, const VelocityGrid& grid);

// ℒ applied through q_bilinear on the defining combination, with the
// Maxwellian arguments sampled on the grid. Returns sqrt(M) * ℒ g (the
// collision-space form) to keep the tails bounded.
Eigen::VectorXd linearized_via_q(const Eigen::VectorXd& g, const CollisionKernel& kernel,
                                 const VelocityGrid& grid);

// Binary cache of assembled matrices ("VMBL").
void save_operator(const std::filesystem::path& path, const LinearizedOperator& op);
LinearizedOperator load_operator(const std::filesystem::path& path, const VelocityGrid& grid);

struct TransportCoefficients {
  double mu = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  // Raw contractions sum <Phi, source> before normalization.
  double raw_viscous = 0.0;
  double raw_thermal = 0.0;
  double raw_electric = 0.0;
  double norm_viscous = 1.0 / 20.0;
  double norm_thermal = 1.0 / 15.0;
  double norm_electric = 1.0 / 3.0;
  double max_solve_residual = 0.0;
  double sigma_source_kernel_overlap = 0.0;
  std::string provenance;
};

// Viscous, thermal and electric sources of the q2/q1 sectors.
struct TransportSources {
  std::array<Eigen::VectorXd, 9> viscous;  // (v_i v_j - |v|^2/3 delta_ij) sqrt(M) q2
  std::array<Eigen::VectorXd, 3> thermal;  // v_j (|v|^2/2 - 5/2) sqrt(M) q2
  std::array<Eigen::VectorXd, 3> electric; // v_j sqrt(M) q1
};
TransportSources transport_sources(const VelocityGrid& grid);

// Cached solutions Phi^A, Phi^B, Phi^sigma (macromicro uses the first two for
// the conservation-law fluxes).
struct TransportSolutions {
  std::array<Eigen::VectorXd, 9> viscous;
  std::array<Eigen::VectorXd, 3> thermal;
  std::array<Eigen::VectorXd, 3> electric;
};
TransportSolutions transport_solutions(const LinearizedOperator& op, const VelocityGrid& grid);

TransportCoefficients transport_coefficients(const LinearizedOperator& op, const VelocityGrid& grid);

}  // namespace vmb
