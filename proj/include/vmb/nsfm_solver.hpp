#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vmb/spectral.hpp"
#include "vmb/state.hpp"

namespace vmb {

struct NSFMConfig {
  double mu = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  double dt = 1e-2;
  double t_end = 1.0;
  std::size_t stride = 1;  // 0 keeps first and last frames only
  bool dealias = true;     // 2/3 rule on quadratic products
};

struct NSFMState {
  VectorField u;
  std::vector<double> theta;
  std::vector<double> n;
  VectorField E;
  VectorField B;
  std::vector<double> p;  // pressure from the last evaluated momentum forcing
  double t = 0.0;

  NSFMState() = default;
  explicit NSFMState(std::size_t nodes);
  std::size_t spatial_nodes() const { return theta.size(); }
  // Boussinesq: rho = -theta.
  std::vector<double> rho() const;
  // w = (3/2) n theta.
  std::vector<double> w() const;
};

// j = n u + sigma(-1/2 grad n + E + u x B).
VectorField ohm_current(const NSFMState& s, double sigma, const SpectralOps& ops);

// ||u||^2 + 5/2 ||theta||^2 + 1/4 ||n||^2 + 1/2 ||E||^2 + 1/2 ||B||^2: the
// kinetic energy 1/2(||f||^2 + ||E||^2 + ||B||^2) of the matching
// well-prepared state. Non-increasing for n = 0 up to cubic terms.
double nsfm_energy(const NSFMState& s, const SpectralOps& ops);

struct NSFMStepInfo {
  double t = 0.0;
  double energy = 0.0;
  double div_u = 0.0;
  double gauss_E = 0.0;  // ||div E - n||
  double gauss_B = 0.0;
  double cfl = 0.0;      // dt max|u| / dx
};

struct NSFMTrajectory {
  std::vector<NSFMState> frames;
  std::vector<NSFMStepInfo> info;  // entry 0 is the initial state
  std::vector<std::string> warnings;
  double dt = 0.0;
  std::size_t steps = 0;
};

// Integrating-factor Heun scheme: viscous/thermal diffusion and the free
// Maxwell rotation are exact, everything else explicit; the Leray projection
// is applied to the momentum forcing at every stage.
class NSFMSolver {
 public:
  using Observer = std::function<void(const NSFMState&, const NSFMStepInfo&)>;

  NSFMSolver(const SpatialGrid& grid, NSFMConfig config);

  const NSFMConfig& config() const { return config_; }
  const SpectralOps& spectral() const { return ops_; }

  void step(NSFMState& s, double dt) const;
  NSFMTrajectory run(NSFMState init, const Observer& observer = {}) const;
  NSFMStepInfo describe(const NSFMState& s, double dt) const;

 private:
  static constexpr int kFields = 11;  // u(3), theta, n, E(3), B(3)
  using Spectral = std::array<std::vector<cplx>, kFields>;

  Spectral to_spectral(const NSFMState& s) const;
  void from_spectral(const Spectral& y, NSFMState& s) const;
  void linear_flow(Spectral& y, double dt) const;
  Spectral forcing(const Spectral& y, std::vector<cplx>* pressure) const;

  SpatialGrid grid_;
  SpectralOps ops_;
  NSFMConfig config_;
  std::vector<char> keep_;  // 2/3-rule mask
};

}  // namespace vmb
