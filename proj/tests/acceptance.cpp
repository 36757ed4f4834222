// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Artifacts land under --out (default ./acceptance_artifacts).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "vmb/collision.hpp"
#include "vmb/conservation.hpp"
#include "vmb/fields.hpp"
#include "vmb/harness.hpp"
#include "vmb/macromicro.hpp"
#include "vmb/nsfm_solver.hpp"

using namespace vmb;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Shared 16^2 x 8^3 reference run (eps 0.2, amplitude 1e-2, T = 1, dt 0.01,
// every step stored).
struct Reference {
  fs::path root;
  RunConfig config;
  std::unique_ptr<KineticModel> model;
  std::unique_ptr<VerdictReport> verdicts;
  std::vector<Frame> frames;

  const KineticModel& kinetic() {
    if (!model) model = std::make_unique<KineticModel>(build_kinetic_model(config));
    return *model;
  }
  const VerdictReport& report() {
    if (!verdicts) {
      simulate_vmb(config, kinetic());
      auto art = load_run_artifacts(config.output.dir);
      verdicts = std::make_unique<VerdictReport>(verify_invariants(art, kinetic()));
      write_json(config.output.dir / "verdicts.json", verdicts->to_json());
      frames = std::move(art.frames);
    }
    return *verdicts;
  }
};

RunConfig reference_config(const fs::path& dir) {
  RunConfig c;
  c.grid.spatial_points = 16;
  c.grid.velocity_points = 8;
  c.vmb.eps = 0.2;
  c.vmb.t_end = 1.0;
  c.vmb.dt_policy.kind = DtPolicyKind::Fixed;
  c.vmb.dt_policy.dt = 0.01;
  c.init.amplitude = 1e-2;
  c.audit.form = AuditForm::MainThm1;
  c.output.snapshot_stride = 1;
  c.output.dir = dir;
  return c;
}

const CollisionKernel& default_kernel() {
  static const CollisionKernel k = RunConfig{}.kernel;
  return k;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Random smooth F: drifting, heated Maxwellian with a low-order polynomial
// modulation that keeps F positive.
std::vector<double> random_smooth(const VelocityGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Vec3 drift{0.4 * U(rng), 0.4 * U(rng), 0.4 * U(rng)};
  const double T = 1.0 + 0.2 * U(rng);
  const double a = 0.1 * U(rng), b = 0.1 * U(rng), c = 0.05 * U(rng);
  std::vector<double> F(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3& v = g.nodes[i];
    Vec3 w{v[0] - drift[0], v[1] - drift[1], v[2] - drift[2]};
    const double m = std::pow(2 * kPi * T, -1.5) * std::exp(-norm2(w) / (2 * T));
    F[i] = m * (1.0 + a * v[0] * v[1] + b * std::sin(v[2]) + c * (norm2(v) - 3.0) * std::tanh(v[0]));
  }
  return F;
}

Outcome collision_invariants() {
  const auto g = build_velocity_grid(8, 6.0);
  const auto& k = default_kernel();
  std::mt19937_64 rng(1);
  double worst_pre = 0.0, worst_post = 0.0;
  for (int sample = 0; sample < 20; ++sample) {
    const auto F = random_smooth(g, rng);
    const auto q = q_bilinear(F, F, k, g);
    const auto loss = q_loss(F, F, k, g);
    // Each moment relative to the same moment of |Q_loss|.
    std::array<double, 5> scale{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec3& v = g.nodes[i];
      const std::array<double, 5> phi{1.0, v[0], v[1], v[2], norm2(v)};
      for (int m = 0; m < 5; ++m) scale[m] += g.quad_weights[i] * std::abs(phi[m] * loss[i]);
    }
    const auto pre = collision_moments(q, g);
    const auto post = collision_moments(conservative_correction(q, g), g);
    for (int m = 0; m < 5; ++m) {
      worst_pre = std::max(worst_pre, std::abs(pre[m]) / scale[m]);
      worst_post = std::max(worst_post, std::abs(post[m]));
    }
  }
  return {worst_pre <= 1e-2 && worst_post <= 1e-12,
          fmt::format("20 random F at 8^3: pre-correction relative moment defect {:.3e} (bound 1e-2), "
                      "post-correction {:.3e} (bound 1e-12)",
                      worst_pre, worst_post)};
}

Outcome null_space_coercivity() {
  const auto g = build_velocity_grid(8, 6.0);
  const auto op = assemble_linearized(default_kernel(), g);
  const double mnorm = op.matrix().norm();
  const double null_res = (op.matrix() * op.kernel_basis()).norm();
  const double delta = op.coercivity_delta.value_or(0.0);

  Eigen::VectorXd nu(static_cast<Eigen::Index>(op.size()));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < g.size(); ++i)
      nu(static_cast<Eigen::Index>(s * g.size() + i)) = std::pow(g.bracket_v[i], 0.5 * op.gamma());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N(0.0, 1.0);
  int bad = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int sample = 0; sample < 100; ++sample) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(op.size()));
    for (auto& e : x) e = N(rng);
    const double xLx = op.inner(op.apply(x), x);
    const auto perp = op.project_perp(x);
    const double nn = op.inner(nu.cwiseProduct(perp), nu.cwiseProduct(perp));
    worst = std::min(worst, xLx / nn);
    if (!(xLx >= (1.0 - 1e-9) * delta * nn)) ++bad;
  }
  const bool pass = null_res <= 1e-10 * mnorm && delta > 0.0 && bad == 0;
  return {pass, fmt::format("||L K|| / ||L|| = {:.2e}, coercivity delta {:.4f}, min Rayleigh quotient over 100 samples "
                            "{:.4f}, {} violations",
                            null_res / mnorm, delta, worst, bad)};
}

Outcome elastic_kinematics() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst_p = 0.0, worst_e = 0.0;
  for (int s = 0; s < 1'000'000; ++s) {
    const Vec3 v{2 * N(rng), 2 * N(rng), 2 * N(rng)}, u{2 * N(rng), 2 * N(rng), 2 * N(rng)};
    Vec3 w{N(rng), N(rng), N(rng)};
    const double n = std::sqrt(norm2(w));
    for (auto& c : w) c /= n;
    const auto [vp, up] = post_collision_velocities(v, u, w);
    const double scale = norm2(v) + norm2(u);
    for (int a = 0; a < 3; ++a)
      worst_p = std::max(worst_p, std::abs(vp[a] + up[a] - v[a] - u[a]) / std::sqrt(scale));
    worst_e = std::max(worst_e, std::abs(norm2(vp) + norm2(up) - scale) / scale);
  }
  return {worst_p <= 1e-12 && worst_e <= 1e-12,
          fmt::format("10^6 triples: relative momentum error {:.2e}, energy error {:.2e}", worst_p, worst_e)};
}

Outcome maxwell_vacuum() {
  const auto sg = build_spatial_grid(2, 16, 2 * kPi);
  const SpectralOps ops(sg);
  EMState em(sg.size());
  for (std::size_t i = 0; i < sg.size(); ++i) {
    const auto x = sg.position(i);
    em.E[1][i] = std::cos(x[0]) + 0.3 * std::sin(2 * x[0] + 3 * x[1]);
    em.E[2][i] = 0.2 * std::cos(x[1]);
    em.B[2][i] = std::cos(x[0]) - 0.1 * std::sin(x[0] + x[1]);
  }
  auto modal = [&](const EMState& s) {
    std::vector<double> e(sg.size(), 0.0);
    std::vector<cplx> hat(sg.size());
    for (int a = 0; a < 3; ++a)
      for (const auto* f : {&s.E[a], &s.B[a]}) {
        ops.forward(*f, hat);
        for (std::size_t m = 0; m < sg.size(); ++m) e[m] += std::norm(hat[m]);
      }
    return e;
  };
  const auto e0 = modal(em);
  const double total = std::accumulate(e0.begin(), e0.end(), 0.0);
  const auto zero = zero_vector_field(sg.size());
  double divb = 0.0;
  for (int n = 0; n < 1000; ++n) {
    em = maxwell_step(em, zero, 0.01, ops);
    divb = std::max(divb, std::sqrt(ops.l2_squared(ops.divergence(em.B))));
  }
  const auto e1 = modal(em);
  double worst = 0.0;
  for (std::size_t m = 0; m < sg.size(); ++m) worst = std::max(worst, std::abs(e1[m] - e0[m]) / total);
  return {worst <= 1e-12 && divb <= 1e-12,
          fmt::format("1000 steps: modal energy drift {:.2e} of total, max ||div B|| {:.2e}", worst, divb)};
}

Outcome nsfm_exact_solutions(Reference& ref) {
  const auto& tc = ref.kinetic().coefficients;
  const auto g = build_spatial_grid(2, 64, 2 * kPi);
  NSFMConfig cfg;
  cfg.mu = tc.mu;
  cfg.kappa = tc.kappa;
  cfg.sigma = tc.sigma;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  const NSFMSolver solver(g, cfg);
  NSFMState s(g.size());
  const double A = 0.5;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.position(i);
    s.u[0][i] = A * std::sin(x[0]) * std::cos(x[1]);
    s.u[1][i] = -A * std::cos(x[0]) * std::sin(x[1]);
  }
  const auto u0 = s.u;
  for (int n = 0; n < 100; ++n) solver.step(s, cfg.dt);
  const double decay = std::exp(-2.0 * cfg.mu);
  double err2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (std::size_t i = 0; i < g.size(); ++i) err2 += std::pow(s.u[a][i] - u0[a][i] * decay, 2) * g.cell_volume();
  const double tg = std::sqrt(err2);

  NSFMState h(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.position(i);
    h.theta[i] = 0.05 * std::exp(-((x[0] - kPi) * (x[0] - kPi) + (x[1] - kPi) * (x[1] - kPi)));
  }
  const auto& ops = solver.spectral();
  std::vector<cplx> before(g.size()), after(g.size());
  ops.forward(h.theta, before);
  for (int n = 0; n < 50; ++n) solver.step(h, cfg.dt);
  ops.forward(h.theta, after);
  double heat = 0.0;
  for (std::size_t m = 0; m < g.size(); ++m) {
    const cplx expect = before[m] * std::exp(-cfg.kappa * norm2(g.wavevector(m)) * 0.5);
    heat = std::max(heat, std::abs(after[m] - expect) / static_cast<double>(g.size()));
  }
  return {tg <= 1e-6 && heat <= 1e-8,
          fmt::format("mu = {:.5f}, kappa = {:.5f}: Taylor-Green L2 error {:.2e} at 64^2 after 100 steps, heat kernel "
                      "per-mode error {:.2e}",
                      cfg.mu, cfg.kappa, tg, heat)};
}

Outcome projection_algebra() {
  const auto vg = build_velocity_grid(8, 6.0);
  const std::size_t nx = 16;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> N(0.0, 1.0);
  double idem = 0.0, orth = 0.0;
  for (int sample = 0; sample < 50; ++sample) {
    SpeciesPair f(nx, vg.size());
    for (int s = 0; s < 2; ++s)
      for (std::size_t x = 0; x < nx; ++x) {
        auto g = f.slice(s, x);
        for (std::size_t i = 0; i < vg.size(); ++i) g[i] = N(rng) * vg.sqrt_maxwellian[i] + 0.01 * N(rng);
      }
    const double norm = phase_inner(f, f, vg);
    const auto pf = project_P(f, vg);
    const auto ppf = project_P(pf, vg);
    double d = 0.0;
    for (std::size_t i = 0; i < pf.size(); ++i) d = std::max(d, std::abs(ppf.values()[i] - pf.values()[i]));
    idem = std::max(idem, d / max_abs(pf.values()));
    orth = std::max(orth, std::abs(phase_inner(pf, micro_part(f, vg), vg)) / norm);
  }
  return {idem <= 1e-12 && orth <= 1e-12,
          fmt::format("50 random states: max |P^2 f - P f| / max |P f| {:.2e}, <Pf, (I-P)f> / ||f||^2 {:.2e}", idem, orth)};
}

Outcome lyapunov_monotone(Reference& ref) {
  const auto& rep = ref.report();
  const auto& mono = rep.at("energy_monotone");
  const auto& lyap = rep.at("lyapunov");
  return {mono.pass && lyap.pass,
          fmt::format("E_N largest per-step increase {:.3e} (bound {:.3e}): {}; audit max margin {:.3e} (bound {:.3e}), {}",
                      mono.value, mono.threshold, mono.pass ? "pass" : "fail", lyap.value, lyap.threshold, lyap.detail)};
}

Outcome decay(Reference& ref) {
  const auto& d = ref.report().at("decay");
  return {d.pass, d.detail};
}

// RSS over the six evolution laws of the run-wide scaled residual.
double conservation_rss(std::span<const Frame> frames, const KineticModel& model, double eps, std::string& detail) {
  const auto rep = conservation_residual(frames, eps, *model.linear, model.vgrid, model.sgrid);
  double s = 0.0;
  for (Law law : {Law::Mass, Law::Momentum, Law::Energy, Law::Charge, Law::Ampere, Law::Faraday}) {
    const double v = rep.at(law).sup_scaled();
    s += v * v;
    detail += fmt::format(" {} {:.2e}", law_name(law), v);
  }
  return std::sqrt(s);
}

Outcome conservation_convergence(Reference& ref) {
  ref.report();
  auto fine_cfg = ref.config;
  fine_cfg.vmb.dt_policy.dt = 0.005;
  fine_cfg.output.dir = ref.root / "reference_dt_half";
  simulate_vmb(fine_cfg, ref.kinetic());
  const auto fine = load_run_artifacts(fine_cfg.output.dir);
  std::string dc, df;
  const double rc = conservation_rss(ref.frames, ref.kinetic(), ref.config.vmb.eps, dc);
  const double rf = conservation_rss(fine.frames, ref.kinetic(), ref.config.vmb.eps, df);
  const double factor = rc / rf;
  return {factor >= 1.5 && factor <= 2.5,
          fmt::format("residual RSS {:.3e} at dt 0.01 [{} ], {:.3e} at dt 0.005 [{} ]; factor {:.3f} (target [1.5, 2.5])",
                      rc, dc, rf, df, factor)};
}

struct SweepOutcome {
  Outcome micro, limit;
};

SweepOutcome eps_sweep(const fs::path& root) {
  RunConfig c;
  c.grid.spatial_points = 8;
  c.grid.velocity_points = 8;
  c.sweep.eps_list = {0.4, 0.2, 0.1};
  c.sweep.t_end = 1.0;
  c.sweep.sample_interval = 0.1;
  c.vmb.dt_policy.kind = DtPolicyKind::PowerLaw;
  // dt = 0.00125 (eps / 0.2)^2 keeps dt / eps^2 fixed across the sweep.
  c.vmb.dt_policy.dt_ref = 0.00125;
  c.vmb.dt_policy.eps_ref = 0.2;
  c.vmb.dt_policy.exponent = 2.0;
  c.output.dir = root / "sweep";
  const auto model = build_kinetic_model(c);
  const auto table = run_sweep(c, model);
  fs::create_directories(c.output.dir);
  table.csv().write(c.output.dir / "convergence.csv");
  write_json(c.output.dir / "convergence.json", table.to_json());

  SweepOutcome out;
  const auto& mr = table.ratios.at("micro_integral");
  const auto& ur = table.ratios.at("err_u");
  bool mpass = !mr.empty(), upass = !ur.empty();
  std::string md, ud;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    md += fmt::format("{}I({}) = {:.3e}", i ? ", " : "", table.rows[i].eps, table.rows[i].micro_integral);
    ud += fmt::format("{}err({}) = {:.3e}", i ? ", " : "", table.rows[i].eps, table.rows[i].err_u);
  }
  md += "; ratios";
  ud += "; ratios";
  for (double r : mr) {
    mpass = mpass && r >= 3.0 && r <= 5.0;
    md += fmt::format(" {:.3f}", r);
  }
  for (double r : ur) {
    upass = upass && r >= 1.4 && r <= 2.8;
    ud += fmt::format(" {:.3f}", r);
  }
  out.micro = {mpass, md + " (target [3, 5])"};
  out.limit = {upass, ud + " (target [1.4, 2.8], which also forces a non-increasing error)"};
  return out;
}

Outcome determinism(Reference& ref) {
  ref.report();
  const auto again = ref.root / "reference_rerun";
  auto cfg = load_config(ref.config.output.dir / "manifest.ini").config;
  cfg.output.dir = again;
  simulate_vmb(cfg, ref.kinetic());
  auto files = [](const fs::path& d) {
    std::ifstream in(d / "manifest.json");
    return nlohmann::json::parse(in).at("files");
  };
  const auto a = files(ref.config.output.dir), b = files(again);
  std::size_t same = 0;
  for (const auto& [name, sum] : a.items())
    if (b.contains(name) && b.at(name) == sum) ++same;
  const bool config_same = format_config(load_config(again / "manifest.ini").config) == format_config(cfg);
  return {a == b && config_same,
          fmt::format("re-run from manifest.ini: {}/{} artifact checksums identical, manifest round trip {}", same, a.size(),
                      config_same ? "exact" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = "acceptance_artifacts";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--out") root = argv[i + 1];
  fs::create_directories(root);

  Reference ref;
  ref.root = root;
  ref.config = reference_config(root / "reference");

  int failed = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o, double seconds) {
    fmt::print("[{}] {:>2}. {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, seconds);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };
  auto timed = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    report(id, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  timed(1, "collision invariants", collision_invariants);
  timed(2, "null space and coercivity", null_space_coercivity);
  timed(3, "elastic kinematics", elastic_kinematics);
  timed(4, "Maxwell vacuum propagation", maxwell_vacuum);
  timed(5, "NSFM exact solutions", [&] { return nsfm_exact_solutions(ref); });
  timed(6, "projection algebra", projection_algebra);
  timed(7, "Lyapunov monotonicity", [&] { return lyapunov_monotone(ref); });

  {
    const auto t0 = std::chrono::steady_clock::now();
    SweepOutcome s;
    try {
      s = eps_sweep(root);
    } catch (const std::exception& e) {
      s.micro = s.limit = {false, fmt::format("exception: {}", e.what())};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(8, "microscopic dissipation scaling", s.micro, sec);
    report(9, "limit convergence", s.limit, 0.0);
  }

  timed(10, "decay (one-sided)", [&] { return decay(ref); });
  timed(11, "conservation residual self-convergence", [&] { return conservation_convergence(ref); });
  timed(12, "determinism and manifest round trip", [&] { return determinism(ref); });

  fmt::print("{} of 12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
