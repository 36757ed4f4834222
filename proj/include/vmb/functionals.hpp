#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vmb/grid.hpp"
#include "vmb/spectral.hpp"
#include "vmb/state.hpp"

namespace vmb {

enum class WeightFamily { NoncutoffW, CutoffBar, CutoffTilde };

struct WeightSpec {
  WeightFamily family = WeightFamily::CutoffBar;
  double ell = 0.0;
  double q = 0.01;
  double vartheta = 0.25;
  int alpha = 0;  // |alpha|
  int beta = 0;   // |beta|
  double t = 0.0;
};

// Weight value at every velocity node:
//   NoncutoffW  exp(q<v>/(1+t)^vt) <v>^{4(ell-|a|-|b|)}
//   CutoffBar   <v>^{ell-|a|-2|b|} exp(q<v>^2/(1+t)^vt)
//   CutoffTilde <v>^{ell-|a|-|b|/2} exp(q<v>^2/(1+t)^vt)
std::vector<double> evaluate_weight(const WeightSpec& spec, const VelocityGrid& vgrid);

// sigma_{n,j} for 0 <= j <= n <= N: sigma_{N,0} = (1+eps0)/2, sigma_{n,0} = 0
// below N, each step in j adds (1+eps0)/2.
class SigmaTable {
 public:
  SigmaTable(int N, double epsilon0);
  double operator()(int n, int j) const;
  int N() const { return N_; }

 private:
  int N_;
  double step_;
};

// Smallest admissible velocity-weight exponents for the cutoff composite.
struct WeightChain {
  double l1 = 0.0, ell_tilde = 0.0, ell1 = 0.0, ell_bar0 = 0.0, l0 = 0.0, ell0 = 0.0, lH = 0.0;
};
WeightChain minimal_chain(int N, double l_bar, const SigmaTable& sigma);

struct SobolevParams {
  int N = 4;
  int N0 = 2;
  double varrho = 1.0;
  double epsilon0 = 0.1;
  double q = 0.01;
  double vartheta = 0.25;
  double gamma = -1.0;  // exponent of the nu weight <v>^gamma
  double l_bar = 0.0;
  // Weight index of the non-cutoff family; NaN selects l_bar + N + 1/2.
  double ell = std::numeric_limits<double>::quiet_NaN();
  double ell_value() const { return std::isnan(ell) ? l_bar + N + 0.5 : ell; }
  void validate() const;
};

// For one phase-space function g: the velocity profile
// sum_x |d^alpha_beta g|^2 (spatial L2 measure, both species summed) for all
// |alpha| + |beta| <= max_order with |beta| <= beta_max.
class DerivativeProfiles {
 public:
  DerivativeProfiles() = default;
  DerivativeProfiles(const SpeciesPair& g, const VelocityGrid& vgrid, const SpectralOps& ops, int max_order,
                     int beta_max, std::vector<double>* mode_energy = nullptr);
  std::span<const double> operator()(const MultiIndex& alpha, const MultiIndex& beta) const;
  int max_order() const { return max_order_; }
  int beta_max() const { return beta_max_; }

 private:
  std::map<std::pair<MultiIndex, MultiIndex>, std::vector<double>> data_;
  int max_order_ = 0;
  int beta_max_ = 0;
};

// Everything the functionals need from one state (f, E, B): derivative
// profiles of {I-P}f, f and Pf, and mode-resolved field energies.
class PhaseSpaceProfiles {
 public:
  PhaseSpaceProfiles(const SpeciesPair& f, const EMState& em, const VelocityGrid& vgrid, const SpectralOps& ops,
                     int max_order);

  int max_order() const { return max_order_; }
  int dim() const { return dim_; }
  std::span<const double> micro(const MultiIndex& alpha, const MultiIndex& beta) const;
  std::span<const double> full(const MultiIndex& alpha) const;
  std::span<const double> macro(const MultiIndex& alpha) const;
  double field_E(const MultiIndex& alpha) const;
  double field_B(const MultiIndex& alpha) const;
  double charge(const MultiIndex& alpha) const;  // rho+ - rho-
  // ||Lambda^{-varrho} g||^2 for g = f (v-integrated), E, B.
  double lambda_f(double varrho) const;
  double lambda_E(double varrho) const;
  double lambda_B(double varrho) const;

 private:
  DerivativeProfiles micro_, full_, macro_;
  std::map<MultiIndex, double> E_, B_, n_;
  std::vector<double> mode_f_, mode_E_, mode_B_, xi_;  // per Fourier mode; xi = |m|/L
  int max_order_;
  int dim_;
  double scale_;
};

// Multi-indices of order k over the first `axes` axes.
std::vector<MultiIndex> multi_indices(int k, int axes);

// Sum over alpha (|alpha| <= N) of ||d^alpha f||^2 (optionally weighted by a
// velocity function and with the nu weight). Spatial derivatives spectral,
// velocity derivatives by finite differences; per-axis velocity orders above 2
// are composed from the first and second differences.
double mixed_sobolev_norm(const SpeciesPair& f, int N, int beta_max, const VelocityGrid& vgrid,
                          const SpectralOps& ops, const std::optional<WeightSpec>& weight, bool nu_weight,
                          double gamma = -1.0);

std::vector<double> velocity_derivative_any(std::span<const double> g, const VelocityGrid& vgrid, const MultiIndex& beta);

struct EnergyReport {
  double t = 0.0;
  int N = 0;
  int N0 = 0;
  double e_N = 0.0;
  double d_N = 0.0;
  std::vector<double> e_k_to_N0;  // k = 0..N0
  std::vector<double> d_k_to_N0;
  double lambda_f = 0.0, lambda_E = 0.0, lambda_B = 0.0;  // Lambda^{-varrho} norms (not squared)
  std::map<std::string, double> weighted;                // named blocks, see functional_names()
};

// e_N = ||f||^2_{H^N} + ||E||^2_{H^N} + ||B||^2_{H^N};
// d_N = eps^-2 ||{I-P}f||^2_{H^N nu} + ||grad Pf||^2_{H^{N-1}} + ||E||^2_{H^{N-1}} + ||grad B||^2_{H^{N-2}}.
std::pair<double, double> energy_dissipation(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double eps,
                                             const SobolevParams& params);
std::pair<double, double> energy_EN_DN(const SpeciesPair& f, const EMState& em, double eps, const VelocityGrid& vgrid,
                                       const SpectralOps& ops, const SobolevParams& params);

// E_{k->N0}, D_{k->N0} for one k.
std::pair<double, double> energy_k(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int k, double eps,
                                   const SobolevParams& params);

// ||Lambda^{-varrho} g|| with the zero mode excluded; |xi| = |m|/L per mode.
double lambda_norm(std::span<const double> field, double varrho, const SpectralOps& ops);

// Weighted families. Each returns (energy, dissipation).
// Non-cutoff E_{n,ell}/D_{n,ell} (D-norm realized as the nu norm).
std::pair<double, double> noncutoff_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, double ell,
                                           double eps, double t, const SobolevParams& params);
// E-bar_{n,l}/D-bar_{n,l}.
std::pair<double, double> cutoff_bar_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, double l,
                                            double t, const SobolevParams& params);
// E^{n,j}_ell/D^{n,j}_ell.
std::pair<double, double> cutoff_tilde_block(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n, int j,
                                             double ell, double eps, double t, const SobolevParams& params,
                                             const SigmaTable& sigma);
// E^{(n)}_ell = sum_{j<=n} E^{n,j}_ell and the matching D.
std::pair<double, double> cutoff_tilde_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, int n,
                                              double ell, double eps, double t, const SobolevParams& params,
                                              const SigmaTable& sigma);
// E_{1->N0-1,ell}/D_{1->N0-1,ell}.
std::pair<double, double> low_order_family(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double ell,
                                           double t, const SobolevParams& params);

enum class AuditForm {
  MainThm1,  // E_{N,l} + E_N ; D_N + D_{N-1,l}
  MainThm2,  // full cutoff composite
  Basic      // E_N ; D_N
};
std::string audit_form_name(AuditForm form);

// Functional and dissipation of the chosen Lyapunov form.
std::pair<double, double> lyapunov_pair(const PhaseSpaceProfiles& p, const VelocityGrid& vgrid, double eps, double t,
                                        const SobolevParams& params, AuditForm form);

// Everything in one report (all families, all k, Lambda norms, both audit forms).
EnergyReport energy_report(const SpeciesPair& f, const EMState& em, double t, double eps, const VelocityGrid& vgrid,
                           const SpectralOps& ops, const SobolevParams& params);

struct LyapunovAudit {
  std::string form;
  double c_D = 1.0;
  double tolerance = 0.0;             // absolute bound on the margin
  std::vector<double> t;              // interval midpoints
  std::vector<double> derivative;     // forward difference of the functional
  std::vector<double> dissipation;    // interval average
  std::vector<double> margin;         // derivative + c_D * dissipation
  double max_margin = 0.0;
  double c_fit = 0.0;                 // largest c with derivative + c * dissipation <= 0 everywhere
  bool pass = false;
};

// Requires at least 2 uniformly spaced samples. The tolerance is
// tol_rel * functional(0).
LyapunovAudit lyapunov_audit(std::span<const double> t, std::span<const double> functional,
                             std::span<const double> dissipation, double c_D, double tol_rel,
                             const std::string& form = "");

struct DecayFit {
  double exponent = 0.0;  // slope of log series against log(1+t)
  double target = 0.0;    // -(k + varrho)
  bool one_sided_pass = false;
  std::string report;
};
DecayFit decay_fit(std::span<const double> t, std::span<const double> series, int k, double varrho);

}  // namespace vmb
