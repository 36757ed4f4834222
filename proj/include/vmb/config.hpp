#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vmb/collision.hpp"
#include "vmb/functionals.hpp"
#include "vmb/nsfm_solver.hpp"
#include "vmb/vmb_solver.hpp"

namespace vmb {

enum class InitProfile { Reference, Random, Equilibrium };

struct GridConfig {
  int dim = 2;
  int spatial_points = 16;
  double box_length = 6.283185307179586;
  int velocity_points = 8;
  double v_max = 6.0;
};

struct InitConfig {
  InitProfile profile = InitProfile::Reference;
  double amplitude = 1e-2;
  int random_modes = 2;  // Random: wavenumbers up to this per axis
};

struct NSFMRunConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  std::size_t stride = 100;
  bool dealias = true;
  int refine = 2;  // sweep reference resolution relative to the kinetic grid
  // Non-positive: use the coefficients computed from the collision operator.
  double mu = 0.0, kappa = 0.0, sigma = 0.0;
};

struct SweepConfig {
  std::vector<double> eps_list{0.4, 0.2, 0.1};
  double t_end = 1.0;
  double sample_interval = 0.05;
  bool concurrent = false;
  // Start the limit reference from the discrete moments of the kinetic
  // initial state instead of the continuum initial fields.
  bool limit_from_moments = true;
};

struct AuditConfig {
  AuditForm form = AuditForm::MainThm1;
  double c_D = 1.0;
  double lyapunov_tol = 1e-6;        // relative to the functional at t = 0
  double conservation_tol = 0.1;     // on sup of the scaled residual per law
  double gauss_drift_tol = 1e-6;
  std::size_t functional_stride = 1; // steps between functional evaluations
  std::vector<std::string> blocks{"E_N_l", "D_N_l", "D_Nm1_l"};
};

struct OutputConfig {
  std::filesystem::path dir = "vmblab_out";
  std::size_t snapshot_stride = 10;
  std::uint64_t seed = 20240601;
  std::filesystem::path operator_cache;  // empty: assemble every run
};

struct RunConfig {
  GridConfig grid;
  CollisionKernel kernel;
  VMBConfig vmb;
  InitConfig init;
  NSFMRunConfig nsfm;
  SweepConfig sweep;
  SobolevParams functionals;
  AuditConfig audit;
  OutputConfig output;
};

struct LoadedConfig {
  RunConfig config;
  std::vector<std::string> warnings;  // hypotheses outside the theorem ranges
};

// INI with sections; unknown keys and malformed values raise ConfigError
// naming "section.key". Omitted keys keep their defaults.
LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const std::filesystem::path& path);

// Sets one "section.key" from its text form, with the same checks as the
// parser; call check_config afterwards.
void set_config_value(RunConfig& config, const std::string& path, const std::string& value);

// Every parameter, including defaults, in a form parse_config reproduces
// exactly (shortest round-trip formatting).
std::string format_config(const RunConfig& config);

// Hard checks (ConfigError) plus range warnings for the theorem hypotheses.
std::vector<std::string> check_config(const RunConfig& config);

std::string profile_name(InitProfile p);
std::string dt_policy_name(DtPolicyKind k);

}  // namespace vmb
