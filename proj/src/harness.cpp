#include "vmb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "vmb/errors.hpp"
#include "vmb/fields.hpp"
#include "vmb/macromicro.hpp"
#include "vmb/snapshot.hpp"

namespace vmb {

namespace {

double nu_micro_norm2(const SpeciesPair& f, const VelocityGrid& vgrid, const SpatialGrid& sgrid, double gamma) {
  const SpeciesPair micro = micro_part(f, vgrid);
  std::vector<double> nu(vgrid.size());
  for (std::size_t i = 0; i < nu.size(); ++i) nu[i] = vgrid.quad_weights[i] * std::pow(vgrid.bracket_v[i], gamma);
  double s = 0.0;
  for (int sp = 0; sp < 2; ++sp)
    for (std::size_t x = 0; x < micro.spatial_nodes(); ++x) {
      const auto g = micro.slice(sp, x);
      for (std::size_t i = 0; i < g.size(); ++i) s += nu[i] * g[i] * g[i];
    }
  return s * sgrid.cell_volume();
}

std::vector<double> random_field(std::mt19937_64& rng, const SpatialGrid& sgrid, int modes, double amplitude) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const std::size_t nx = sgrid.size();
  std::vector<double> out(nx, 0.0);
  const int m1 = modes, m2 = sgrid.dim > 1 ? modes : 0, m3 = sgrid.dim > 2 ? modes : 0;
  for (int a = -m1; a <= m1; ++a)
    for (int b = -m2; b <= m2; ++b)
      for (int c = -m3; c <= m3; ++c) {
        // One representative of each +-m pair; skip the mean.
        if (a < 0 || (a == 0 && (b < 0 || (b == 0 && c <= 0)))) continue;
        const double ca = U(rng), cb = U(rng);
        for (std::size_t i = 0; i < nx; ++i) {
          const Vec3 x = sgrid.position(i);
          const double ph = 2.0 * std::numbers::pi *
                            (a * x[0] / sgrid.box_length[0] + b * x[1] / sgrid.box_length[1] + c * x[2] / sgrid.box_length[2]);
          out[i] += ca * std::cos(ph) + cb * std::sin(ph);
        }
      }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out) v *= amplitude / peak;
  return out;
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::vector<double> vector_diff_norms(const VectorField& a, const VectorField& b, int order, const SpectralOps& ops) {
  std::vector<double> out;
  for (int c = 0; c < 3; ++c) out.push_back(sobolev_distance(a[c], b[c], order, ops));
  return out;
}

double vec_norm(const std::vector<double>& comps) {
  double s = 0.0;
  for (double c : comps) s += c * c;
  return std::sqrt(s);
}

SnapshotHeader snapshot_header(const KineticModel& model, double eps, double t) {
  return {static_cast<std::uint32_t>(model.sgrid.dim), static_cast<std::uint32_t>(model.sgrid.points_per_axis),
          model.sgrid.box_length[0], static_cast<std::uint32_t>(model.vgrid.points_per_axis), model.vgrid.v_max, eps, t};
}

SobolevParams functional_params(const RunConfig& config) {
  SobolevParams p = config.functionals;
  p.gamma = config.kernel.gamma;
  return p;
}

nlohmann::json coefficients_json(const TransportCoefficients& c) {
  return {{"mu", c.mu}, {"kappa", c.kappa}, {"sigma", c.sigma}, {"max_solve_residual", c.max_solve_residual}};
}

void clear_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) return;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("frame_") && e.path().extension() == ".vmbs") std::filesystem::remove(e.path());
  }
}

}  // namespace

KineticModel build_kinetic_model(const RunConfig& config) {
  check_config(config);
  KineticModel m;
  const auto& g = config.grid;
  m.sgrid = build_spatial_grid(g.dim, g.spatial_points, g.box_length);
  m.vgrid = build_velocity_grid(g.velocity_points, g.v_max);
  m.kernel = config.kernel;
  const auto& cache = config.output.operator_cache;
  if (!cache.empty() && std::filesystem::exists(cache)) {
    auto op = std::make_shared<LinearizedOperator>(load_operator(cache, m.vgrid));
    if (op->gamma() != m.kernel.gamma) throw ConfigError("output.operator_cache: cached operator has a different gamma");
    m.linear = std::move(op);
  } else {
    auto op = std::make_shared<LinearizedOperator>(assemble_linearized(m.kernel, m.vgrid));
    if (!cache.empty()) save_operator(cache, *op);
    m.linear = std::move(op);
  }
  m.nonlinear = std::make_shared<NonlinearOperator>(m.kernel, m.vgrid);
  m.coefficients = transport_coefficients(*m.linear, m.vgrid);
  return m;
}

InitialData make_initial_data(const InitConfig& init, const SpatialGrid& sgrid, const SpectralOps& ops,
                              std::uint64_t seed) {
  const std::size_t nx = sgrid.size();
  InitialData d{{std::vector<double>(nx, 0.0), std::vector<double>(nx, 0.0), std::vector<double>(nx, 0.0),
                 zero_vector_field(nx)},
                EMState(nx)};
  const double A = init.amplitude;
  switch (init.profile) {
    case InitProfile::Equilibrium:
      return d;
    case InitProfile::Reference: {
      if (sgrid.dim < 2) throw ConfigError("init.profile: the reference data needs dim >= 2");
      for (std::size_t i = 0; i < nx; ++i) {
        const Vec3 x = sgrid.position(i);
        const double k1 = 2.0 * std::numbers::pi / sgrid.box_length[0], k2 = 2.0 * std::numbers::pi / sgrid.box_length[1];
        d.macro.u[0][i] = A * std::sin(k2 * x[1]);
        d.macro.u[1][i] = 0.5 * A * std::sin(k1 * x[0]);
        d.macro.theta[i] = 0.5 * A * std::cos(k1 * x[0] + k2 * x[1]);
        d.macro.rho[i] = -d.macro.theta[i];
        d.macro.n[i] = 0.5 * A * std::cos(k1 * x[0]);
        d.em.B[2][i] = 0.5 * A * std::cos(k2 * x[1]);
      }
      break;
    }
    case InitProfile::Random: {
      std::mt19937_64 rng(seed);
      VectorField u, B;
      for (int c = 0; c < 3; ++c) u[c] = random_field(rng, sgrid, init.random_modes, A);
      d.macro.u = leray_project(u, ops);
      d.macro.theta = random_field(rng, sgrid, init.random_modes, 0.5 * A);
      for (std::size_t i = 0; i < nx; ++i) d.macro.rho[i] = -d.macro.theta[i];
      d.macro.n = random_field(rng, sgrid, init.random_modes, 0.5 * A);
      for (int c = 0; c < 3; ++c) B[c] = random_field(rng, sgrid, init.random_modes, 0.5 * A);
      d.em.B = leray_project(B, ops);
      break;
    }
  }
  d.em.E = gauss_field(d.macro.n, ops);
  return d;
}

NSFMState nsfm_initial_state(const InitialData& data, const SpectralOps& ops) {
  const std::size_t nx = data.macro.theta.size();
  NSFMState s(nx);
  s.u = leray_project(data.macro.u, ops);
  for (std::size_t i = 0; i < nx; ++i) s.theta[i] = 0.6 * data.macro.theta[i] - 0.4 * data.macro.rho[i];
  s.n = data.macro.n;
  s.E = data.em.E;
  s.B = data.em.B;
  return s;
}

NSFMState nsfm_state_from_kinetic(const VMBState& k, const VelocityGrid& vgrid, const SpectralOps& ops) {
  NSFMState s(k.f.spatial_nodes());
  s.u = leray_project(limit_velocity(k.f, vgrid), ops);
  s.theta = limit_temperature(k.f, vgrid);
  s.n = charge_density(k.f, vgrid);
  s.E = k.em.E;
  s.B = k.em.B;
  s.t = k.t;
  return s;
}

NSFMConfig nsfm_config(const RunConfig& config, const TransportCoefficients& c) {
  NSFMConfig n;
  n.mu = config.nsfm.mu > 0.0 ? config.nsfm.mu : c.mu;
  n.kappa = config.nsfm.kappa > 0.0 ? config.nsfm.kappa : c.kappa;
  n.sigma = config.nsfm.sigma > 0.0 ? config.nsfm.sigma : c.sigma;
  n.dt = config.nsfm.dt;
  n.t_end = config.nsfm.t_end;
  n.stride = config.nsfm.stride;
  n.dealias = config.nsfm.dealias;
  return n;
}

std::vector<double> restrict_field(std::span<const double> fine, const SpectralOps& fine_ops, const SpectralOps& coarse_ops) {
  const auto& fg = fine_ops.grid();
  const auto& cg = coarse_ops.grid();
  if (fine.size() != fine_ops.size()) throw ShapeError("restrict_field: size mismatch");
  if (fg.dim != cg.dim || fg.box_length != cg.box_length || fg.points_per_axis < cg.points_per_axis)
    throw GridError("restrict_field: grids are not nested");
  std::map<std::array<int, 3>, std::size_t> index;
  for (std::size_t m = 0; m < fg.size(); ++m) index[fg.wavenumbers[m]] = m;
  std::vector<cplx> fh(fine_ops.size()), ch(coarse_ops.size(), 0.0);
  fine_ops.forward(fine, fh);
  const double ratio = static_cast<double>(coarse_ops.size()) / static_cast<double>(fine_ops.size());
  for (std::size_t m = 0; m < cg.size(); ++m) {
    bool nyquist = false;
    for (int a = 0; a < cg.dim; ++a) nyquist = nyquist || cg.is_nyquist(m, a);
    if (nyquist) continue;
    ch[m] = fh[index.at(cg.wavenumbers[m])] * ratio;
  }
  std::vector<double> out(coarse_ops.size());
  coarse_ops.inverse(ch, out);
  return out;
}

double sobolev_distance(std::span<const double> a, std::span<const double> b, int order, const SpectralOps& ops) {
  if (a.size() != ops.size() || b.size() != ops.size()) throw ShapeError("sobolev_distance: size mismatch");
  if (order < 0) throw ConfigError("sobolev_distance: negative order");
  const std::size_t nx = ops.size();
  std::vector<double> d(nx);
  for (std::size_t i = 0; i < nx; ++i) d[i] = a[i] - b[i];
  std::vector<cplx> h(nx);
  ops.forward(d, h);
  double s = 0.0;
  for (std::size_t m = 0; m < nx; ++m) {
    double w = 0.0;
    for (int k = 0; k <= order; ++k)
      for (const auto& alpha : multi_indices(k, ops.grid().dim)) w += std::norm(ops.derivative_symbol(m, alpha));
    s += w * std::norm(h[m]);
  }
  return std::sqrt(s * ops.grid().volume() / (static_cast<double>(nx) * static_cast<double>(nx)));
}

double report_block(const EnergyReport& r, const std::string& block, AuditForm form) {
  if (block == "e_N") return r.e_N;
  if (block == "d_N") return r.d_N;
  if (block == "lambda_f") return r.lambda_f;
  if (block == "lambda_E") return r.lambda_E;
  if (block == "lambda_B") return r.lambda_B;
  if (block == "lyap_E" || block == "lyap_D")
    return r.weighted.at("lyap_" + audit_form_name(form) + (block == "lyap_E" ? "_E" : "_D"));
  for (const char* prefix : {"e_k", "d_k"})
    if (block.starts_with(prefix) && block.ends_with("_N0")) {
      const int k = std::stoi(block.substr(3, block.size() - 6));
      const auto& v = prefix[0] == 'e' ? r.e_k_to_N0 : r.d_k_to_N0;
      if (k < 0 || static_cast<std::size_t>(k) >= v.size()) throw ConfigError("functional block " + block + " out of range");
      return v[static_cast<std::size_t>(k)];
    }
  auto it = r.weighted.find(block);
  if (it == r.weighted.end()) throw ConfigError("unknown functional block '" + block + "'");
  return it->second;
}

std::vector<double> FunctionalSeries::column(const std::string& block, AuditForm form) const {
  std::vector<double> out;
  for (const auto& r : reports) out.push_back(report_block(r, block, form));
  return out;
}

FunctionalRecorder::FunctionalRecorder(const VelocityGrid& vgrid, const SpectralOps& ops, SobolevParams params,
                                       double eps, std::size_t stride)
    : vgrid_(vgrid), ops_(ops), params_(params), eps_(eps), stride_(std::max<std::size_t>(stride, 1)) {
  params_.validate();
}

void FunctionalRecorder::observe(const VMBState& s) {
  if (calls_++ % stride_ != 0) return;
  series_.t.push_back(s.t);
  series_.reports.push_back(energy_report(s.f, s.em, s.t, eps_, vgrid_, ops_, params_));
}

CsvTable ConvergenceTable::csv() const {
  CsvTable t({{"eps", "1"},
              {"dt", "1"},
              {"steps", "count"},
              {"err_u", "1"},
              {"err_theta", "1"},
              {"err_n", "1"},
              {"err_E", "1"},
              {"err_B", "1"},
              {"micro_integral", "1"},
              {"seconds", "s"}});
  for (const auto& r : rows)
    t.add_row({r.eps, r.dt, static_cast<double>(r.steps), r.err_u, r.err_theta, r.err_n, r.err_E, r.err_B,
               r.micro_integral, r.seconds});
  return t;
}

nlohmann::json ConvergenceTable::to_json() const {
  nlohmann::json j;
  j["sobolev_order"] = sobolev_order;
  j["nsfm_dt"] = nsfm_dt;
  j["nsfm_points"] = nsfm_points;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"eps", r.eps},
                         {"dt", r.dt},
                         {"steps", r.steps},
                         {"err_u", r.err_u},
                         {"err_theta", r.err_theta},
                         {"err_n", r.err_n},
                         {"err_E", r.err_E},
                         {"err_B", r.err_B},
                         {"micro_integral", r.micro_integral}});
  j["ratios"] = ratios;
  if (!abort_message.empty()) j["abort"] = abort_message;
  return j;
}

ConvergenceTable run_sweep(const RunConfig& config, const KineticModel& model) {
  check_config(config);
  const auto& sw = config.sweep;
  const double T = sw.t_end, h = sw.sample_interval;
  const auto samples = static_cast<std::size_t>(std::llround(T / h));
  if (samples < 1 || std::abs(static_cast<double>(samples) * h - T) > 1e-9 * T)
    throw ConfigError("sweep.sample_interval must divide sweep.t_end");
  const int order = config.functionals.N - 1;

  ConvergenceTable table;
  table.sobolev_order = order;
  const SpectralOps ops(model.sgrid);

  // Limit reference on the refined grid, restricted to the kinetic grid at
  // every sample time.
  const SpatialGrid fine_grid = build_spatial_grid(model.sgrid.dim, model.sgrid.points_per_axis * config.nsfm.refine,
                                                   model.sgrid.box_length[0]);
  NSFMConfig nc = nsfm_config(config, model.coefficients);
  const auto sub = static_cast<std::size_t>(std::ceil(h / nc.dt - 1e-9));
  nc.dt = h / static_cast<double>(sub);
  nc.t_end = T;
  nc.stride = sub;
  table.nsfm_dt = nc.dt;
  table.nsfm_points = fine_grid.points_per_axis;
  struct Reference {
    VectorField u, E, B;
    std::vector<double> theta, n;
  };
  std::vector<Reference> ref;
  {
    const NSFMSolver fluid(fine_grid, nc);
    const auto fine_data = make_initial_data(config.init, fine_grid, fluid.spectral(), config.output.seed);
    // On a coarse velocity grid the discrete moments of the kinetic data differ
    // from the continuum fields by an eps-independent amount.
    const auto start = sw.limit_from_moments
                           ? nsfm_state_from_kinetic(well_prepared_init(fine_data.macro, fine_data.em, model.vgrid,
                                                                        fluid.spectral()),
                                                     model.vgrid, fluid.spectral())
                           : nsfm_initial_state(fine_data, fluid.spectral());
    const auto traj = fluid.run(start);
    if (traj.frames.size() != samples + 1) throw TrajectoryError("nsfm reference frames do not match the sample times");
    const auto& fo = fluid.spectral();
    for (const auto& fr : traj.frames) {
      Reference r;
      for (int c = 0; c < 3; ++c) {
        r.u[c] = restrict_field(fr.u[c], fo, ops);
        r.E[c] = restrict_field(fr.E[c], fo, ops);
        r.B[c] = restrict_field(fr.B[c], fo, ops);
      }
      r.theta = restrict_field(fr.theta, fo, ops);
      r.n = restrict_field(fr.n, fo, ops);
      ref.push_back(std::move(r));
    }
  }

  const auto data = make_initial_data(config.init, model.sgrid, ops, config.output.seed);
  const VMBState init = well_prepared_init(data.macro, data.em, model.vgrid, ops);

  std::vector<std::unique_ptr<VMBSolver>> solvers;
  std::vector<ConvergenceRow> rows(sw.eps_list.size());
  for (std::size_t i = 0; i < sw.eps_list.size(); ++i) {
    VMBConfig vc = config.vmb;
    vc.eps = sw.eps_list[i];
    vc.t_end = T;
    vc.stride = 0;
    const double dt0 = VMBSolver(model.sgrid, model.vgrid, model.linear, model.nonlinear, vc).resolve_dt(init);
    const auto per_sample = static_cast<std::size_t>(std::ceil(h / dt0 - 1e-9));
    vc.dt_policy = DtPolicy{};
    vc.dt_policy.kind = DtPolicyKind::Fixed;
    vc.dt_policy.dt = h / static_cast<double>(per_sample);
    rows[i].eps = vc.eps;
    rows[i].dt = vc.dt_policy.dt;
    solvers.push_back(std::make_unique<VMBSolver>(model.sgrid, model.vgrid, model.linear, model.nonlinear, vc));
  }

  auto run_one = [&](std::size_t i) {
    auto& row = rows[i];
    const auto& solver = *solvers[i];
    const auto per_sample = static_cast<std::size_t>(std::llround(h / row.dt));
    std::size_t calls = 0;
    double prev_micro = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    auto observer = [&](const VMBState& s, const StepDiagnostics&) {
      const double micro = nu_micro_norm2(s.f, model.vgrid, model.sgrid, model.kernel.gamma);
      if (calls > 0) row.micro_integral += 0.5 * row.dt * (prev_micro + micro);
      prev_micro = micro;
      if (calls % per_sample == 0) {
        const auto& r = ref.at(calls / per_sample);
        const auto u = leray_project(limit_velocity(s.f, model.vgrid), ops);
        const auto theta = limit_temperature(s.f, model.vgrid);
        const auto n = charge_density(s.f, model.vgrid);
        row.err_u = std::max(row.err_u, vec_norm(vector_diff_norms(u, r.u, order, ops)));
        row.err_theta = std::max(row.err_theta, sobolev_distance(theta, r.theta, order, ops));
        row.err_n = std::max(row.err_n, sobolev_distance(n, r.n, order, ops));
        row.err_E = std::max(row.err_E, vec_norm(vector_diff_norms(s.em.E, r.E, order, ops)));
        row.err_B = std::max(row.err_B, vec_norm(vector_diff_norms(s.em.B, r.B, order, ops)));
      }
      ++calls;
    };
    const auto traj = solver.run(init, observer);
    row.steps = traj.steps;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  std::vector<std::string> errors(rows.size());
  if (sw.concurrent) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < rows.size(); ++i) jobs.push_back(std::async(std::launch::async, run_one, i));
    for (std::size_t i = 0; i < jobs.size(); ++i) try {
        jobs[i].get();
      } catch (const NumericalAbort& e) {
        errors[i] = e.what();
      }
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) try {
        run_one(i);
      } catch (const NumericalAbort& e) {
        errors[i] = e.what();
        break;
      }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) {
      if (table.abort_message.empty()) table.abort_message = fmt::format("eps = {}: {}", rows[i].eps, errors[i]);
      continue;
    }
    if (rows[i].steps > 0) table.rows.push_back(rows[i]);
  }
  auto ratio = [&](const std::string& name, double ConvergenceRow::*field) {
    auto& v = table.ratios[name];
    for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
      const double den = table.rows[i + 1].*field;
      v.push_back(den > 0.0 ? table.rows[i].*field / den : std::numeric_limits<double>::infinity());
    }
  };
  ratio("err_u", &ConvergenceRow::err_u);
  ratio("err_theta", &ConvergenceRow::err_theta);
  ratio("err_n", &ConvergenceRow::err_n);
  ratio("err_E", &ConvergenceRow::err_E);
  ratio("err_B", &ConvergenceRow::err_B);
  ratio("micro_integral", &ConvergenceRow::micro_integral);
  if (!table.abort_message.empty()) throw SweepAborted(table.abort_message, table);
  return table;
}

bool VerdictReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Verdict& VerdictReport::at(const std::string& name) const {
  for (const auto& v : verdicts)
    if (v.name == name) return v;
  throw TrajectoryError("no verdict named " + name);
}

nlohmann::json VerdictReport::to_json() const {
  nlohmann::json j;
  j["pass"] = all_pass();
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : verdicts)
    j["verdicts"].push_back(
        {{"name", v.name}, {"pass", v.pass}, {"value", v.value}, {"threshold", v.threshold}, {"detail", v.detail}});
  return j;
}

RunArtifacts load_run_artifacts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("artifact directory " + dir.string() + " does not exist");
  const auto manifest = dir / "manifest.ini";
  if (!std::filesystem::exists(manifest)) throw IoError("missing " + manifest.string());
  RunArtifacts a;
  a.config = load_config(manifest).config;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("frame_") && e.path().extension() == ".vmbs") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const auto& g = a.config.grid;
  for (const auto& p : files) {
    try {
      auto s = read_snapshot(p);
      const auto& h = s.header;
      if (static_cast<int>(h.dim) != g.dim || static_cast<int>(h.spatial_points) != g.spatial_points ||
          static_cast<int>(h.velocity_points) != g.velocity_points || h.v_max != g.v_max || h.box_length != g.box_length ||
          h.eps != a.config.vmb.eps)
        throw IoError("snapshot header disagrees with manifest.ini");
      a.frames.push_back({h.t, std::move(s.f), std::move(s.em)});
    } catch (const IoError& e) {
      a.failures.push_back(p.filename().string() + ": " + e.what());
    }
  }
  return a;
}

VerdictReport verify_invariants(const RunArtifacts& art, const KineticModel& model) {
  VerdictReport rep;
  const auto& cfg = art.config;
  const double eps = cfg.vmb.eps;
  const auto params = functional_params(cfg);
  const SpectralOps ops(model.sgrid);
  auto add = [&](std::string name, bool pass, double value, double threshold, std::string detail) {
    rep.verdicts.push_back({std::move(name), pass, value, threshold, std::move(detail)});
  };

  std::string fails;
  for (const auto& f : art.failures) fails += (fails.empty() ? "" : "; ") + f;
  add("snapshot_checksums", art.failures.empty(), static_cast<double>(art.failures.size()), 0.0,
      art.failures.empty() ? fmt::format("{} snapshots verified", art.frames.size()) : fails);
  if (art.frames.empty()) {
    add("frames", false, 0.0, 1.0, "no readable snapshots");
    return rep;
  }

  // Longest uniformly spaced prefix (the final frame is kept off-stride).
  std::vector<Frame> frames(art.frames.begin(), art.frames.end());
  if (frames.size() >= 3) {
    const double dt = frames[1].t - frames[0].t;
    std::size_t keep = 2;
    while (keep < frames.size() && std::abs(frames[keep].t - frames[keep - 1].t - dt) <= 1e-9 * std::max(1.0, frames[keep].t))
      ++keep;
    frames.resize(keep);
  }

  {
    const double cv = model.sgrid.cell_volume();
    double scale = 0.0;
    for (int s = 0; s < 2; ++s)
      for (std::size_t x = 0; x < frames[0].f.spatial_nodes(); ++x) {
        const auto g = frames[0].f.slice(s, x);
        for (std::size_t i = 0; i < g.size(); ++i) scale += cv * model.vgrid.quad_weights[i] * model.vgrid.sqrt_maxwellian[i] * std::abs(g[i]);
      }
    auto mass = [&](const SpeciesPair& f, int s) {
      double m = 0.0;
      for (std::size_t x = 0; x < f.spatial_nodes(); ++x) {
        const auto g = f.slice(s, x);
        for (std::size_t i = 0; i < g.size(); ++i) m += model.vgrid.quad_weights[i] * model.vgrid.sqrt_maxwellian[i] * g[i];
      }
      return m * cv;
    };
    double drift = 0.0;
    for (const auto& fr : art.frames)
      for (int s = 0; s < 2; ++s) drift = std::max(drift, std::abs(mass(fr.f, s) - mass(art.frames[0].f, s)));
    const double rel = scale > 0.0 ? drift / scale : drift;
    add("species_mass", rel <= 1e-10, rel, 1e-10, "max species mass drift relative to the initial L1 moment scale");
  }

  {
    const auto [ge0, gb0] = gauss_residuals(art.frames[0].em, art.frames[0].f, model.vgrid, ops);
    double de = 0.0, gb = gb0;
    for (const auto& fr : art.frames) {
      const auto [ge, b] = gauss_residuals(fr.em, fr.f, model.vgrid, ops);
      de = std::max(de, std::abs(ge - ge0));
      gb = std::max(gb, b);
    }
    const double v = std::max(de, gb);
    add("gauss", v <= cfg.audit.gauss_drift_tol, v, cfg.audit.gauss_drift_tol,
        fmt::format("drift of ||div E - n|| {:.3e}, max ||div B|| {:.3e}", de, gb));
  }

  if (frames.size() >= 3) {
    const auto report = conservation_residual(frames, eps, *model.linear, model.vgrid, model.sgrid);
    double worst = 0.0;
    std::string detail;
    for (Law law : {Law::Mass, Law::Momentum, Law::Energy, Law::Charge, Law::Ampere, Law::Faraday}) {
      const double s = report.at(law).sup_scaled();
      worst = std::max(worst, s);
      detail += fmt::format("{}{} {:.3e}", detail.empty() ? "" : ", ", law_name(law), s);
    }
    add("conservation", worst <= cfg.audit.conservation_tol, worst, cfg.audit.conservation_tol,
        fmt::format("sup scaled residual over {} frames (dt = {:.4g}): {}", frames.size(), frames[1].t - frames[0].t, detail));
  } else {
    add("conservation", true, 0.0, cfg.audit.conservation_tol, "not evaluated: fewer than 3 uniformly spaced frames");
  }

  std::vector<double> t, eN, lyapE, lyapD, decay;
  for (const auto& fr : frames) {
    const auto r = energy_report(fr.f, fr.em, fr.t, eps, model.vgrid, ops, params);
    t.push_back(fr.t);
    eN.push_back(r.e_N);
    lyapE.push_back(report_block(r, "lyap_E", cfg.audit.form));
    lyapD.push_back(report_block(r, "lyap_D", cfg.audit.form));
    decay.push_back(r.e_k_to_N0.at(0));
  }
  if (t.size() >= 2) {
    double rise = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < eN.size(); ++k) rise = std::max(rise, eN[k + 1] - eN[k]);
    const double tol = cfg.audit.lyapunov_tol * eN[0];
    add("energy_monotone", rise <= tol, rise, tol, "largest increase of E_N between consecutive frames");
    const auto audit = lyapunov_audit(t, lyapE, lyapD, cfg.audit.c_D, cfg.audit.lyapunov_tol, audit_form_name(cfg.audit.form));
    add("lyapunov", audit.pass, audit.max_margin, audit.tolerance,
        fmt::format("form {}, c_D = {}, largest c with dF/dt + c D <= 0: {:.4g}", audit.form, audit.c_D, audit.c_fit));
    const bool zero = std::all_of(decay.begin(), decay.end(), [](double v) { return v == 0.0; });
    if (zero) {
      add("decay", true, 0.0, 0.0, "zero state: nothing to decay");
    } else if (std::any_of(decay.begin(), decay.end(), [](double v) { return !(v > 0.0); })) {
      add("decay", false, 0.0, 0.0, "E_{0->N0} series has non-positive entries");
    } else {
      const auto fit = decay_fit(t, decay, 0, params.varrho);
      add("decay", fit.one_sided_pass, fit.exponent, fit.target, fit.report);
    }
  } else {
    add("energy_monotone", true, 0.0, 0.0, "not evaluated: single frame");
    add("lyapunov", true, 0.0, 0.0, "not evaluated: single frame");
    add("decay", true, 0.0, 0.0, "not evaluated: single frame");
  }
  return rep;
}

SimulationResult simulate_vmb(const RunConfig& config, const KineticModel& model) {
  check_config(config);
  const auto& out = config.output.dir;
  std::filesystem::create_directories(out);
  clear_frames(out);
  VMBConfig vc = config.vmb;
  vc.stride = config.output.snapshot_stride;
  vc.dump_dir = out / "abort";
  const VMBSolver solver(model.sgrid, model.vgrid, model.linear, model.nonlinear, vc);
  const auto& ops = solver.spectral();
  const auto data = make_initial_data(config.init, model.sgrid, ops, config.output.seed);
  const VMBState init = well_prepared_init(data.macro, data.em, model.vgrid, ops);

  std::vector<CsvColumn> cols{{"t", "1"},         {"e_N", "1"},          {"d_N", "1"},     {"mass_plus", "1"},
                              {"mass_minus", "1"}, {"gauss_E", "1"},      {"gauss_B", "1"}};
  for (const auto& b : config.audit.blocks) cols.push_back({b, "1"});
  CsvTable csv(cols);

  SimulationResult res;
  FunctionalRecorder rec(model.vgrid, ops, functional_params(config), vc.eps, config.audit.functional_stride);
  auto observer = [&](const VMBState& s, const StepDiagnostics& d) {
    const auto before = rec.series().reports.size();
    rec.observe(s);
    if (rec.series().reports.size() == before) return;
    const auto& r = rec.series().reports.back();
    std::vector<double> row{s.t, r.e_N, r.d_N, d.mass_plus, d.mass_minus, d.gauss_E, d.gauss_B};
    for (const auto& b : config.audit.blocks) row.push_back(report_block(r, b, config.audit.form));
    csv.add_row(std::move(row));
  };
  res.trajectory = solver.run(init, observer);
  res.functionals = rec.series();

  nlohmann::json files = nlohmann::json::object();
  for (std::size_t k = 0; k < res.trajectory.frames.size(); ++k) {
    const auto& fr = res.trajectory.frames[k];
    const auto path = out / fmt::format("frame_{:06d}.vmbs", k);
    write_snapshot(path, snapshot_header(model, vc.eps, fr.t), fr.f, fr.em);
    res.snapshots.push_back(path);
    files[path.filename().string()] = hex(file_checksum(path));
  }
  csv.write(out / "timeseries.csv");
  files["timeseries.csv"] = hex(file_checksum(out / "timeseries.csv"));
  write_text(out / "manifest.ini", format_config(config));

  nlohmann::json m;
  m["command"] = "simulate-vmb";
  m["coefficients"] = coefficients_json(model.coefficients);
  m["dt"] = res.trajectory.dt;
  m["steps"] = res.trajectory.steps;
  m["functionals"] = {{"N", config.functionals.N}, {"N0", config.functionals.N0}};
  m["warnings"] = check_config(config);
  m["files"] = files;
  write_json(out / "manifest.json", m);
  return res;
}

NSFMTrajectory simulate_nsfm(const RunConfig& config, const KineticModel& model) {
  check_config(config);
  const auto& out = config.output.dir;
  std::filesystem::create_directories(out);
  const NSFMSolver solver(model.sgrid, nsfm_config(config, model.coefficients));
  const auto data = make_initial_data(config.init, model.sgrid, solver.spectral(), config.output.seed);
  auto traj = solver.run(nsfm_initial_state(data, solver.spectral()));
  CsvTable csv({{"t", "1"}, {"energy", "1"}, {"div_u", "1"}, {"gauss_E", "1"}, {"gauss_B", "1"}, {"cfl", "1"}});
  for (const auto& i : traj.info) csv.add_row({i.t, i.energy, i.div_u, i.gauss_E, i.gauss_B, i.cfl});
  csv.write(out / "nsfm_timeseries.csv");
  write_text(out / "manifest.ini", format_config(config));
  const auto c = solver.config();
  nlohmann::json m;
  m["command"] = "simulate-nsfm";
  m["coefficients"] = {{"mu", c.mu}, {"kappa", c.kappa}, {"sigma", c.sigma}};
  m["dt"] = traj.dt;
  m["steps"] = traj.steps;
  m["warnings"] = traj.warnings;
  m["files"] = {{"nsfm_timeseries.csv", hex(file_checksum(out / "nsfm_timeseries.csv"))}};
  write_json(out / "manifest.json", m);
  return traj;
}

}  // namespace vmb
