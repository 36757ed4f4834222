#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "vmb/grid.hpp"
#include "vmb/state.hpp"

namespace vmb {

// Coefficients of P f in the closed-form moments
//   rho± = <f±, sqrt M>,  u = 1/2 <f+ + f-, v sqrt M>,  theta = 1/12 <f+ + f-, (|v|^2 - 3) sqrt M>.
struct MacroState {
  std::vector<double> rho_plus;
  std::vector<double> rho_minus;
  VectorField u;
  std::vector<double> theta;
};

MacroState macro_state(const SpeciesPair& f, const VelocityGrid& grid);

// Discrete orthogonal projection onto the null space (quadrature inner
// product, orthonormalized basis), applied at every spatial node.
SpeciesPair project_P(const SpeciesPair& f, const VelocityGrid& grid);
SpeciesPair micro_part(const SpeciesPair& f, const VelocityGrid& grid);

struct FluidMoments {
  std::vector<double> rho;
  std::vector<double> theta;
  std::vector<double> n;
  std::vector<double> w;  // carries 1/eps
  VectorField u;
  VectorField j;          // carries 1/eps
  double eps_used = 0.0;
};

FluidMoments fluid_moments(const SpeciesPair& f, double eps, const VelocityGrid& grid);

// Charge density n = <f, q1 sqrt M> and current (1/eps) <f, q1 v sqrt M>.
std::vector<double> charge_density(const SpeciesPair& f, const VelocityGrid& grid);
VectorField current_density(const SpeciesPair& f, double eps, const VelocityGrid& grid);

// Moments compared against the fluid limit: 1/2 <f, q2 v sqrt M> (before the
// Leray projection) and <f, 1/2 q2 (|v|^2/5 - 1) sqrt M>.
VectorField limit_velocity(const SpeciesPair& f, const VelocityGrid& grid);
std::vector<double> limit_temperature(const SpeciesPair& f, const VelocityGrid& grid);

// A_mj(f) = int (v_m v_j - c_mj) sqrt(M) f dv with c = delta_mj by default;
// Verbatim uses c = 1 for every entry.
enum class TraceConvention { KroneckerDelta, Verbatim };
Eigen::Matrix3d moment_A(std::span<const double> f, const VelocityGrid& grid,
                         TraceConvention convention = TraceConvention::KroneckerDelta);
// B_j(f) = 1/10 int (|v|^2 - 5) v_j sqrt(M) f dv.
Eigen::Vector3d moment_B(std::span<const double> f, const VelocityGrid& grid);

// G = <v sqrt M, {I-P} f . q1> per spatial node.
VectorField g_vector(const SpeciesPair& f, const VelocityGrid& grid);

// Quadrature inner product over velocity and spatial nodes (cell volume not
// included), used for orthogonality checks.
double phase_inner(const SpeciesPair& a, const SpeciesPair& b, const VelocityGrid& grid);

// Per-node moments W^T f_s for weight columns W (nv x k); result is nx x k.
Eigen::MatrixXd species_moments(const SpeciesPair& f, int species, const Eigen::MatrixXd& weights);

}  // namespace vmb
