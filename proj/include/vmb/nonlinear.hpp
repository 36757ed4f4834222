#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "vmb/collision.hpp"
#include "vmb/state.hpp"

namespace vmb {

enum class NullSpaceCorrection { None, Project };

struct NonlinearOptions {
  // Memory allowed for the precomputed gain tensor; above it the operator
  // falls back to direct quadrature per spatial node.
  std::size_t tensor_bytes_cap = std::size_t{2} << 30;
  NullSpaceCorrection correction = NullSpaceCorrection::Project;
};

// Nonlinear collision term T(f, g) with
//   T+(f, g)(v) = sum_{u, omega} K sqrt(M(u)) [f+(v') s(u') - f+(v) s(u)],  s = g+ + g-,
// which is M^{-1/2} Q(M^{1/2} f+, M^{1/2} s) after the energy identity
// sqrt(M(v')) sqrt(M(u')) = sqrt(M(v)) sqrt(M(u)); T- likewise with f-.
class NonlinearOperator {
 public:
  NonlinearOperator(const CollisionKernel& kernel, const VelocityGrid& grid, NonlinearOptions options = {});

  bool tensor_backed() const { return !gain_.empty(); }
  std::size_t tensor_bytes() const { return gain_.size() * sizeof(double); }
  const NonlinearOptions& options() const { return options_; }

  SpeciesPair apply(const SpeciesPair& f, const SpeciesPair& g) const;

 private:
  SpeciesPair apply_tensor(const SpeciesPair& f, const SpeciesPair& g) const;
  SpeciesPair apply_direct(const SpeciesPair& f, const SpeciesPair& g) const;

  CollisionKernel kernel_;
  VelocityGrid grid_;
  NonlinearOptions options_;
  Eigen::MatrixXd basis_;
  std::vector<double> gain_;  // nv blocks of nv x nv, row-major
  Eigen::MatrixXd loss_;      // loss_(v, u) = sum_omega K sqrt(M(u))
};

// Direct quadrature of T at one spatial node; f and g are stacked [+, -].
Eigen::VectorXd nonlinear_T(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const CollisionKernel& kernel,
                            const VelocityGrid& grid, NullSpaceCorrection correction = NullSpaceCorrection::Project);

namespace serial {
SpeciesPair nonlinear_T(const SpeciesPair& f, const SpeciesPair& g, const CollisionKernel& kernel,
                        const VelocityGrid& grid, NullSpaceCorrection correction = NullSpaceCorrection::Project);
}

}  // namespace vmb
