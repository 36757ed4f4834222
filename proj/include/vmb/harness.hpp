#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmb/collision.hpp"
#include "vmb/config.hpp"
#include "vmb/conservation.hpp"
#include "vmb/errors.hpp"
#include "vmb/functionals.hpp"
#include "vmb/nonlinear.hpp"
#include "vmb/nsfm_solver.hpp"
#include "vmb/report.hpp"
#include "vmb/vmb_solver.hpp"

namespace vmb {

// Grids, collision operators and transport coefficients shared by every run
// of one configuration.
struct KineticModel {
  SpatialGrid sgrid;
  VelocityGrid vgrid;
  CollisionKernel kernel;
  std::shared_ptr<const LinearizedOperator> linear;
  std::shared_ptr<const NonlinearOperator> nonlinear;
  TransportCoefficients coefficients;
};

// Assembles the operators, or loads them from config.output.operator_cache
// when present (and writes the cache when absent).
KineticModel build_kinetic_model(const RunConfig& config);

struct InitialData {
  MacroFields macro;
  EMState em;
};

// Well-prepared macroscopic data: div u = 0, rho + theta = 0, E from Gauss.
// Reference: u = A(sin x2, 1/2 sin x1, 0), theta = -rho = A/2 cos(x1 + x2),
// n = A/2 cos x1, B = (0, 0, A/2 cos x2). Random: seeded low-mode fields of
// the same structure. Equilibrium: all zero.
InitialData make_initial_data(const InitConfig& init, const SpatialGrid& sgrid, const SpectralOps& ops,
                              std::uint64_t seed);

// Limit data: u = Leray(u0), theta = 3/5 theta0 - 2/5 rho0, n, E, B.
NSFMState nsfm_initial_state(const InitialData& data, const SpectralOps& ops);

// Limit state carried by a kinetic state: u = Leray(limit_velocity f),
// theta = limit_temperature f, n = charge density, E and B as given.
NSFMState nsfm_state_from_kinetic(const VMBState& s, const VelocityGrid& vgrid, const SpectralOps& ops);

NSFMConfig nsfm_config(const RunConfig& config, const TransportCoefficients& coefficients);

// Resample a field from a finer periodic grid by Fourier truncation; coarse
// Nyquist modes are set to zero.
std::vector<double> restrict_field(std::span<const double> fine, const SpectralOps& fine_ops, const SpectralOps& coarse_ops);

// sqrt(sum_{|alpha| <= order} ||d^alpha (a - b)||^2).
double sobolev_distance(std::span<const double> a, std::span<const double> b, int order, const SpectralOps& ops);

// Functional time series recorded along a run.
struct FunctionalSeries {
  std::vector<double> t;
  std::vector<EnergyReport> reports;
  std::vector<double> column(const std::string& block, AuditForm form) const;
};

// Observer adaptor evaluating energy_report every `stride` observed states.
class FunctionalRecorder {
 public:
  FunctionalRecorder(const VelocityGrid& vgrid, const SpectralOps& ops, SobolevParams params, double eps,
                     std::size_t stride);
  void observe(const VMBState& s);
  const FunctionalSeries& series() const { return series_; }

 private:
  const VelocityGrid& vgrid_;
  const SpectralOps& ops_;
  SobolevParams params_;
  double eps_;
  std::size_t stride_;
  std::size_t calls_ = 0;
  FunctionalSeries series_;
};

// Value of a named block in a report: any key of EnergyReport::weighted,
// e_N, d_N, e_k{k}_N0, d_k{k}_N0, lambda_f/E/B, lyap_E and lyap_D (the pair
// of the given audit form).
double report_block(const EnergyReport& r, const std::string& block, AuditForm form);

struct ConvergenceRow {
  double eps = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  double err_u = 0.0, err_theta = 0.0, err_n = 0.0, err_E = 0.0, err_B = 0.0;
  double micro_integral = 0.0;  // int_0^T ||{I-P} f||_nu^2 dt
  double seconds = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  // Successive ratios value(eps_i) / value(eps_{i+1}).
  std::map<std::string, std::vector<double>> ratios;
  int sobolev_order = 0;
  double nsfm_dt = 0.0;
  int nsfm_points = 0;
  std::string abort_message;  // non-empty when a run aborted; rows are partial
  CsvTable csv() const;
  nlohmann::json to_json() const;
};

struct SweepAborted : NumericalAbort {
  SweepAborted(const std::string& what, ConvergenceTable partial) : NumericalAbort(what), table(std::move(partial)) {}
  ConvergenceTable table;
};

// One VMB run per eps in config.sweep.eps_list against one NSFM reference on a
// grid refined by config.nsfm.refine. Errors are sup over frames spaced by
// sweep.sample_interval, in the H^{N-1} distance.
ConvergenceTable run_sweep(const RunConfig& config, const KineticModel& model);

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct VerdictReport {
  std::vector<Verdict> verdicts;
  bool all_pass() const;
  const Verdict& at(const std::string& name) const;
  nlohmann::json to_json() const;
};

// A run directory as written by simulate_vmb.
struct RunArtifacts {
  RunConfig config;
  std::vector<Frame> frames;
  std::vector<std::string> failures;  // unreadable or corrupted snapshots
};

RunArtifacts load_run_artifacts(const std::filesystem::path& dir);

// Checksums, species mass, Gauss drift, conservation residuals, Lyapunov
// audit and one-sided decay fit, each as a verdict.
VerdictReport verify_invariants(const RunArtifacts& artifacts, const KineticModel& model);

struct SimulationResult {
  Trajectory trajectory;
  FunctionalSeries functionals;
  std::vector<std::filesystem::path> snapshots;
};

// Runs the configured VMB problem and writes snapshots (frame_NNNNNN.vmbs),
// timeseries.csv, manifest.ini (the resolved configuration) and manifest.json
// (coefficients, step size, output checksums) into config.output.dir.
SimulationResult simulate_vmb(const RunConfig& config, const KineticModel& model);

// NSFM run with its CSV and manifests.
NSFMTrajectory simulate_nsfm(const RunConfig& config, const KineticModel& model);

}  // namespace vmb
