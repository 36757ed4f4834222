#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vmb/collision.hpp"
#include "vmb/nonlinear.hpp"
#include "vmb/spectral.hpp"
#include "vmb/state.hpp"

namespace vmb {

enum class DtPolicyKind { Fixed, Cfl, PowerLaw };

struct DtPolicy {
  DtPolicyKind kind = DtPolicyKind::Fixed;
  double dt = 0.01;          // Fixed
  double cfl_factor = 0.5;   // Cfl: factor * min(dx / (v_max/eps), eps dv / force_scale)
  double dt_ref = 0.01;      // PowerLaw: dt_ref * (eps / eps_ref)^exponent
  double eps_ref = 0.2;
  double exponent = 1.0;
};

struct VMBConfig {
  double eps = 0.2;
  double t_end = 1.0;
  DtPolicy dt_policy;
  bool conservation_fixup = true;
  bool nonlinear = true;    // include (1/eps) T(f, f)
  bool fields = true;       // include forces and the Maxwell subsystem
  std::size_t stride = 1;   // store every stride-th step; 0 keeps first and last only
  std::filesystem::path dump_dir;  // last frames are written here on a numerical abort
};

struct StepDiagnostics {
  double t = 0.0;
  double dt = 0.0;
  double mass_plus = 0.0;
  double mass_minus = 0.0;
  double fixup_plus = 0.0;   // magnitude of the c sqrt(M) correction per species
  double fixup_minus = 0.0;
  double gauss_E = 0.0;
  double gauss_B = 0.0;
};

struct VMBState {
  SpeciesPair f;
  EMState em;
  double t = 0.0;
};

struct Trajectory {
  std::vector<Frame> frames;
  std::vector<StepDiagnostics> diagnostics;  // entry 0 describes the initial state
  double dt = 0.0;
  std::size_t steps = 0;
};

// Macroscopic initial fields for the well-prepared initializer.
struct MacroFields {
  std::vector<double> rho;
  std::vector<double> theta;
  std::vector<double> n;
  VectorField u;
};

// f± = (rho ± n/2) sqrt M + u.v sqrt M + theta (|v|^2/2 - 3/2) sqrt M.
VMBState well_prepared_init(const MacroFields& macro, const EMState& em, const VelocityGrid& vgrid,
                            const SpectralOps& ops);

// Gauss-consistent longitudinal field E = -grad phi with -lap phi = n
// (mean of n ignored).
VectorField gauss_field(std::span<const double> n, const SpectralOps& ops);

// Leray projection of a periodic vector field; k = 0 untouched.
VectorField leray_project(const VectorField& u, const SpectralOps& ops);

class VMBSolver {
 public:
  using Observer = std::function<void(const VMBState&, const StepDiagnostics&)>;

  VMBSolver(const SpatialGrid& sgrid, const VelocityGrid& vgrid, std::shared_ptr<const LinearizedOperator> linear,
            std::shared_ptr<const NonlinearOperator> nonlinear, VMBConfig config);

  const VMBConfig& config() const { return config_; }
  const SpectralOps& spectral() const { return ops_; }
  const VelocityGrid& velocity_grid() const { return vgrid_; }

  // Step size from the policy, shrunk so that an integer number of steps
  // reaches t_end from t0.
  double resolve_dt(const VMBState& init) const;

  // One Strang step: transport/2, forces/2, collision, forces/2, transport/2,
  // then the species-mass fixup towards target_mass.
  StepDiagnostics step(VMBState& state, double dt, const std::array<double, 2>& target_mass) const;

  // t_end == init.t yields the initial frame only.
  Trajectory run(VMBState init, const Observer& observer = {}) const;

  std::array<double, 2> species_mass(const SpeciesPair& f) const;

  // Individual sub-steps, exposed for tests.
  void transport(VMBState& state, double tau) const;
  void forces(VMBState& state, double tau) const;
  void collide(VMBState& state, double dt) const;

 private:
  SpatialGrid sgrid_;
  VelocityGrid vgrid_;
  SpectralOps ops_;
  std::shared_ptr<const LinearizedOperator> linear_;
  std::shared_ptr<const NonlinearOperator> nonlinear_;
  VMBConfig config_;
};

}  // namespace vmb
