#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vmb/config.hpp"
#include "vmb/errors.hpp"
#include "vmb/harness.hpp"
#include "vmb/report.hpp"

namespace {

enum Exit { kPass = 0, kOther = 1, kVerdictFail = 2, kConfigError = 3, kNumericalAbort = 4 };

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

vmb::RunConfig resolve(const Common& c) {
  vmb::LoadedConfig loaded;
  if (!c.config.empty()) loaded = vmb::load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw vmb::ConfigError(kv + ": expected section.key=value");
    vmb::set_config_value(loaded.config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.out.empty()) loaded.config.output.dir = c.out;
  for (const auto& w : vmb::check_config(loaded.config)) spdlog::warn("{}", w);
  return loaded.config;
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("-c,--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", c.overrides, "override as section.key=value (repeatable)");
  if (with_out) cmd->add_option("-o,--out", c.out, "output directory (overrides output.dir)");
}

int print_verdicts(const vmb::VerdictReport& rep) {
  for (const auto& v : rep.verdicts)
    fmt::print("{:<20} {}  value={:.4e} threshold={:.4e}  {}\n", v.name, v.pass ? "PASS" : "FAIL", v.value, v.threshold,
               v.detail);
  return rep.all_pass() ? kPass : kVerdictFail;
}

int cmd_coefficients(const Common& c) {
  const auto cfg = resolve(c);
  const auto model = vmb::build_kinetic_model(cfg);
  const auto& tc = model.coefficients;
  fmt::print("mu = {:.10g}\nkappa = {:.10g}\nsigma = {:.10g}\nmax solve residual = {:.3e}\n", tc.mu, tc.kappa, tc.sigma,
             tc.max_solve_residual);
  if (!c.out.empty()) {
    vmb::write_json(cfg.output.dir / "coefficients.json",
                    {{"mu", tc.mu}, {"kappa", tc.kappa}, {"sigma", tc.sigma}, {"max_solve_residual", tc.max_solve_residual},
                     {"provenance", tc.provenance}});
    vmb::write_text(cfg.output.dir / "manifest.ini", vmb::format_config(cfg));
  }
  return kPass;
}

int cmd_simulate_vmb(const Common& c) {
  const auto cfg = resolve(c);
  const auto model = vmb::build_kinetic_model(cfg);
  spdlog::info("mu = {:.5f}, kappa = {:.5f}, sigma = {:.5f}", model.coefficients.mu, model.coefficients.kappa,
               model.coefficients.sigma);
  const auto res = vmb::simulate_vmb(cfg, model);
  spdlog::info("{} steps of dt = {:.4g}, {} snapshots in {}", res.trajectory.steps, res.trajectory.dt,
               res.snapshots.size(), cfg.output.dir.string());
  const auto rep = vmb::verify_invariants(vmb::load_run_artifacts(cfg.output.dir), model);
  vmb::write_json(cfg.output.dir / "verdicts.json", rep.to_json());
  return print_verdicts(rep);
}

int cmd_simulate_nsfm(const Common& c) {
  const auto cfg = resolve(c);
  const auto model = vmb::build_kinetic_model(cfg);
  const auto traj = vmb::simulate_nsfm(cfg, model);
  for (const auto& w : traj.warnings) spdlog::warn("{}", w);
  const auto& last = traj.info.back();
  fmt::print("t = {:.4g}, energy = {:.6e}, div u = {:.2e}, gauss E = {:.2e}\n", last.t, last.energy, last.div_u, last.gauss_E);
  return kPass;
}

int cmd_sweep(const Common& c) {
  const auto cfg = resolve(c);
  const auto model = vmb::build_kinetic_model(cfg);
  auto emit = [&](const vmb::ConvergenceTable& t) {
    t.csv().write(cfg.output.dir / "convergence.csv");
    vmb::write_text(cfg.output.dir / "manifest.ini", vmb::format_config(cfg));
  };
  vmb::ConvergenceTable table;
  try {
    table = vmb::run_sweep(cfg, model);
  } catch (const vmb::SweepAborted& e) {
    emit(e.table);
    throw;
  }
  emit(table);
  vmb::VerdictReport rep;
  for (double r : table.ratios.at("err_u"))
    rep.verdicts.push_back({"u_ratio", r >= 1.4 && r <= 2.8, r, 2.8, "sup-in-time u error ratio per halving, in [1.4, 2.8]"});
  for (double r : table.ratios.at("micro_integral"))
    rep.verdicts.push_back({"micro_ratio", r >= 3.0 && r <= 5.0, r, 5.0, "I_eps ratio per halving, in [3, 5]"});
  auto j = table.to_json();
  j["verdicts"] = rep.to_json();
  vmb::write_json(cfg.output.dir / "convergence.json", j);
  fmt::print("{}", table.csv().str());
  return print_verdicts(rep);
}

int cmd_verify(const std::string& dir) {
  const auto art = vmb::load_run_artifacts(dir);
  const auto model = vmb::build_kinetic_model(art.config);
  const auto rep = vmb::verify_invariants(art, model);
  vmb::write_json(std::filesystem::path(dir) / "verdicts.json", rep.to_json());
  return print_verdicts(rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic and fluid plasma laboratory"};
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "trace, debug, info, warn, error or off");

  Common coef, vmbc, nsfm, sweep;
  std::string verify_dir;
  add_common(app.add_subcommand("coefficients", "transport coefficients of the configured kernel"), coef);
  add_common(app.add_subcommand("simulate-vmb", "kinetic run with snapshots, time series and verdicts"), vmbc);
  add_common(app.add_subcommand("simulate-nsfm", "limit fluid run with time series"), nsfm);
  add_common(app.add_subcommand("sweep", "eps sweep against the fluid limit"), sweep);
  auto* verify = app.add_subcommand("verify", "re-check a simulate-vmb artifact directory");
  verify->add_option("dir", verify_dir, "artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  spdlog::set_level(spdlog::level::from_str(level));

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "coefficients") return cmd_coefficients(coef);
    if (name == "simulate-vmb") return cmd_simulate_vmb(vmbc);
    if (name == "simulate-nsfm") return cmd_simulate_nsfm(nsfm);
    if (name == "sweep") return cmd_sweep(sweep);
    return cmd_verify(verify_dir);
  } catch (const vmb::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfigError;
  } catch (const vmb::UnsupportedKernelError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfigError;
  } catch (const vmb::NumericalAbort& e) {
    spdlog::error("numerical abort: {}", e.what());
    return kNumericalAbort;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
}
