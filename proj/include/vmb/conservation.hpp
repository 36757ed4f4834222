#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vmb/collision.hpp"
#include "vmb/spectral.hpp"
#include "vmb/state.hpp"

namespace vmb {

// Macroscopic content of one frame needed by the local conservation laws.
struct ConservationSample {
  double t = 0.0;
  std::vector<double> rho, theta, n;
  VectorField u, j, E, B;
  // Viscous stress <A-hat sqrt(M) q2, (1/eps) L(f/2)>, row-major (i, j).
  std::array<std::vector<double>, 9> stress;
  // Heat flux <B-hat sqrt(M) q2, (1/eps) L(f/2)>.
  VectorField heat;
};

enum class Law { Mass, Momentum, Energy, Charge, Ampere, Faraday, GaussE, GaussB };
inline constexpr std::array<Law, 8> kAllLaws{Law::Mass,   Law::Momentum, Law::Energy, Law::Charge,
                                            Law::Ampere, Law::Faraday,  Law::GaussE, Law::GaussB};
std::string law_name(Law law);

struct LawSeries {
  Law law;
  std::vector<double> absolute;    // L2 residual per frame
  std::vector<double> term_scale;  // largest term norm per frame
  // absolute / term_scale, with the scale floored at 1e-12 of its run maximum
  // so frames where every term vanishes report 0 rather than noise.
  std::vector<double> normalized;
  double sup_absolute() const;
  double sup_normalized() const;
  // sup absolute / sup term_scale: one scale for the whole run.
  double sup_scaled() const;
  // Same, restricted to frames with centred time differences.
  double sup_scaled_interior() const;
};

struct ConservationReport {
  std::vector<double> t;
  std::vector<LawSeries> laws;  // in kAllLaws order
  const LawSeries& at(Law law) const;
};

// Precomputes L Phi for the viscous and thermal flux solutions once per
// (operator, grid, eps).
class ConservationAudit {
 public:
  ConservationAudit(const LinearizedOperator& op, const VelocityGrid& vgrid, const SpatialGrid& sgrid, double eps);

  ConservationSample sample(const SpeciesPair& f, const EMState& em, double t) const;
  // Needs at least three uniformly spaced samples; d/dt is centred inside and
  // second-order one-sided at the ends.
  ConservationReport residual(std::span<const ConservationSample> samples) const;

 private:
  VelocityGrid vgrid_;
  SpectralOps ops_;
  double eps_;
  Eigen::MatrixXd flux_;  // (2 nv) x 12: L Phi^A (9 columns), L Phi^B (3 columns)
};

ConservationReport conservation_residual(std::span<const Frame> frames, double eps, const LinearizedOperator& op,
                                         const VelocityGrid& vgrid, const SpatialGrid& sgrid);

}  // namespace vmb
