#include "vmb/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "vmb/errors.hpp"

namespace vmb {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& path, const std::string& what, const std::string& value) {
  throw ConfigError(fmt::format("{}: expected {}, got '{}'", path, what, value));
}

double to_real(const std::string& path, const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad(path, "a real number", s);
  return v;
}

long long to_int(const std::string& path, const std::string& s) {
  long long v = 0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad(path, "an integer", s);
  return v;
}

std::size_t to_count(const std::string& path, const std::string& s) {
  const auto v = to_int(path, s);
  if (v < 0) bad(path, "a non-negative integer", s);
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& path, const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  bad(path, "a boolean", s);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string real(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt::format("{}", v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& path, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Schema = std::map<std::string, std::map<std::string, Field>>;

#define REAL(member) \
  Field{[](RunConfig& c, const std::string& p, const std::string& v) { c.member = to_real(p, v); }, \
        [](const RunConfig& c) { return real(c.member); }}
#define INT(member) \
  Field{[](RunConfig& c, const std::string& p, const std::string& v) { c.member = static_cast<int>(to_int(p, v)); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.member); }}
#define COUNT(member) \
  Field{[](RunConfig& c, const std::string& p, const std::string& v) { c.member = to_count(p, v); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.member); }}
#define BOOL(member) \
  Field{[](RunConfig& c, const std::string& p, const std::string& v) { c.member = to_bool(p, v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define PATH(member) \
  Field{[](RunConfig& c, const std::string&, const std::string& v) { c.member = trim(v); }, \
        [](const RunConfig& c) { return c.member.string(); }}

const Schema& schema() {
  static const Schema s = [] {
    Schema s;
    s["grid"] = {{"dim", INT(grid.dim)},
                 {"spatial_points", INT(grid.spatial_points)},
                 {"box_length", REAL(grid.box_length)},
                 {"velocity_points", INT(grid.velocity_points)},
                 {"v_max", REAL(grid.v_max)}};
    s["kernel"] = {
        {"gamma", REAL(kernel.gamma)},
        {"angular_profile",
         Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                 const auto t = trim(v);
                 if (t == "abs_cos") c.kernel.angular_profile = AngularProfile::AbsCos;
                 else if (t == "constant") c.kernel.angular_profile = AngularProfile::Constant;
                 else bad(p, "abs_cos or constant", v);
               },
               [](const RunConfig& c) {
                 return std::string(c.kernel.angular_profile == AngularProfile::AbsCos ? "abs_cos" : "constant");
               }}},
        {"angular_nodes", INT(kernel.angular_nodes)},
        {"scale", REAL(kernel.scale)}};
    s["vmb"] = {
        {"eps", REAL(vmb.eps)},
        {"t_end", REAL(vmb.t_end)},
        {"dt_policy",
         Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                 const auto t = trim(v);
                 if (t == "fixed") c.vmb.dt_policy.kind = DtPolicyKind::Fixed;
                 else if (t == "cfl") c.vmb.dt_policy.kind = DtPolicyKind::Cfl;
                 else if (t == "power_law") c.vmb.dt_policy.kind = DtPolicyKind::PowerLaw;
                 else bad(p, "fixed, cfl or power_law", v);
               },
               [](const RunConfig& c) { return dt_policy_name(c.vmb.dt_policy.kind); }}},
        {"dt", REAL(vmb.dt_policy.dt)},
        {"cfl_factor", REAL(vmb.dt_policy.cfl_factor)},
        {"dt_ref", REAL(vmb.dt_policy.dt_ref)},
        {"eps_ref", REAL(vmb.dt_policy.eps_ref)},
        {"dt_exponent", REAL(vmb.dt_policy.exponent)},
        {"conservation_fixup", BOOL(vmb.conservation_fixup)},
        {"nonlinear", BOOL(vmb.nonlinear)},
        {"fields", BOOL(vmb.fields)},
        {"stride", COUNT(vmb.stride)}};
    s["init"] = {
        {"profile",
         Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                 const auto t = trim(v);
                 if (t == "reference") c.init.profile = InitProfile::Reference;
                 else if (t == "random") c.init.profile = InitProfile::Random;
                 else if (t == "equilibrium") c.init.profile = InitProfile::Equilibrium;
                 else bad(p, "reference, random or equilibrium", v);
               },
               [](const RunConfig& c) { return profile_name(c.init.profile); }}},
        {"amplitude", REAL(init.amplitude)},
        {"random_modes", INT(init.random_modes)}};
    s["nsfm"] = {{"dt", REAL(nsfm.dt)},         {"t_end", REAL(nsfm.t_end)}, {"stride", COUNT(nsfm.stride)},
                 {"dealias", BOOL(nsfm.dealias)}, {"refine", INT(nsfm.refine)}, {"mu", REAL(nsfm.mu)},
                 {"kappa", REAL(nsfm.kappa)},     {"sigma", REAL(nsfm.sigma)}};
    s["sweep"] = {
        {"eps_list",
         Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                 c.sweep.eps_list.clear();
                 for (const auto& item : split_list(v)) c.sweep.eps_list.push_back(to_real(p, item));
               },
               [](const RunConfig& c) { return join(c.sweep.eps_list); }}},
        {"t_end", REAL(sweep.t_end)},
        {"sample_interval", REAL(sweep.sample_interval)},
        {"concurrent", BOOL(sweep.concurrent)},
        {"limit_from_moments", BOOL(sweep.limit_from_moments)}};
    s["functionals"] = {{"N", INT(functionals.N)},
                        {"N0", INT(functionals.N0)},
                        {"varrho", REAL(functionals.varrho)},
                        {"epsilon0", REAL(functionals.epsilon0)},
                        {"q", REAL(functionals.q)},
                        {"vartheta", REAL(functionals.vartheta)},
                        {"l_bar", REAL(functionals.l_bar)},
                        {"ell", REAL(functionals.ell)}};
    s["audit"] = {
        {"form",
         Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                 const auto t = trim(v);
                 if (t == "main_thm1") c.audit.form = AuditForm::MainThm1;
                 else if (t == "main_thm2") c.audit.form = AuditForm::MainThm2;
                 else if (t == "basic") c.audit.form = AuditForm::Basic;
                 else bad(p, "main_thm1, main_thm2 or basic", v);
               },
               [](const RunConfig& c) { return audit_form_name(c.audit.form); }}},
        {"c_D", REAL(audit.c_D)},
        {"lyapunov_tol", REAL(audit.lyapunov_tol)},
        {"conservation_tol", REAL(audit.conservation_tol)},
        {"gauss_drift_tol", REAL(audit.gauss_drift_tol)},
        {"functional_stride", COUNT(audit.functional_stride)},
        {"blocks", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.audit.blocks = split_list(v); },
                         [](const RunConfig& c) { return join(c.audit.blocks); }}}};
    s["output"] = {{"dir", PATH(output.dir)},
                   {"snapshot_stride", COUNT(output.snapshot_stride)},
                   {"seed", Field{[](RunConfig& c, const std::string& p, const std::string& v) {
                                    c.output.seed = static_cast<std::uint64_t>(to_count(p, v));
                                  },
                                  [](const RunConfig& c) { return fmt::format("{}", c.output.seed); }}},
                   {"operator_cache", PATH(output.operator_cache)}};
    return s;
  }();
  return s;
}

#undef REAL
#undef INT
#undef COUNT
#undef BOOL
#undef PATH

}  // namespace

std::string profile_name(InitProfile p) {
  switch (p) {
    case InitProfile::Reference: return "reference";
    case InitProfile::Random: return "random";
    case InitProfile::Equilibrium: return "equilibrium";
  }
  return "?";
}

std::string dt_policy_name(DtPolicyKind k) {
  switch (k) {
    case DtPolicyKind::Fixed: return "fixed";
    case DtPolicyKind::Cfl: return "cfl";
    case DtPolicyKind::PowerLaw: return "power_law";
  }
  return "?";
}

std::vector<std::string> check_config(const RunConfig& c) {
  auto fail = [](const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); };
  const auto& g = c.grid;
  if (g.dim < 1 || g.dim > 3) fail("grid.dim", "must be 1, 2 or 3");
  if (g.spatial_points < 2 || g.spatial_points % 2) fail("grid.spatial_points", "must be an even integer >= 2");
  if (!(g.box_length > 0.0)) fail("grid.box_length", "must be positive");
  if (g.velocity_points < 4 || g.velocity_points % 2) fail("grid.velocity_points", "must be an even integer >= 4");
  if (!(g.v_max > 0.0)) fail("grid.v_max", "must be positive");
  try {
    c.kernel.validate();
  } catch (const Error& e) {
    fail("kernel", e.what());
  }
  if (!(c.vmb.eps > 0.0 && c.vmb.eps <= 1.0)) fail("vmb.eps", "must lie in (0, 1]");
  if (!(c.vmb.t_end >= 0.0)) fail("vmb.t_end", "must be non-negative");
  if (!(c.vmb.dt_policy.dt > 0.0)) fail("vmb.dt", "must be positive");
  if (!(c.vmb.dt_policy.dt_ref > 0.0)) fail("vmb.dt_ref", "must be positive");
  if (!(c.vmb.dt_policy.eps_ref > 0.0)) fail("vmb.eps_ref", "must be positive");
  if (!(c.vmb.dt_policy.cfl_factor > 0.0)) fail("vmb.cfl_factor", "must be positive");
  if (!std::isfinite(c.init.amplitude) || c.init.amplitude < 0.0) fail("init.amplitude", "must be non-negative");
  if (c.init.random_modes < 1) fail("init.random_modes", "must be at least 1");
  if (!(c.nsfm.dt > 0.0)) fail("nsfm.dt", "must be positive");
  if (c.nsfm.refine < 1) fail("nsfm.refine", "must be at least 1");
  if (c.sweep.eps_list.empty()) fail("sweep.eps_list", "must not be empty");
  for (std::size_t i = 0; i < c.sweep.eps_list.size(); ++i) {
    const double e = c.sweep.eps_list[i];
    if (!(e > 0.0 && e <= 1.0)) fail("sweep.eps_list", fmt::format("entry {} outside (0, 1]", e));
    if (i && !(e < c.sweep.eps_list[i - 1])) fail("sweep.eps_list", "must be strictly decreasing");
  }
  if (!(c.sweep.t_end > 0.0)) fail("sweep.t_end", "must be positive");
  if (!(c.sweep.sample_interval > 0.0)) fail("sweep.sample_interval", "must be positive");
  const auto& f = c.functionals;
  if (f.N < 1) fail("functionals.N", "must be at least 1");
  if (f.N0 < 1 || f.N0 > f.N) fail("functionals.N0", "must lie in [1, N]");
  if (f.N > g.spatial_points / 2) fail("functionals.N", "exceeds the spatial band limit points/2");
  if (!(f.varrho > 0.0)) fail("functionals.varrho", "must be positive");
  if (!(f.q > 0.0)) fail("functionals.q", "must be positive");
  if (!(f.vartheta > 0.0)) fail("functionals.vartheta", "must be positive");
  if (!(f.epsilon0 > 0.0)) fail("functionals.epsilon0", "must be positive");
  if (!(c.audit.c_D >= 0.0)) fail("audit.c_D", "must be non-negative");
  if (!(c.audit.lyapunov_tol >= 0.0)) fail("audit.lyapunov_tol", "must be non-negative");
  if (c.audit.functional_stride < 1) fail("audit.functional_stride", "must be at least 1");

  std::vector<std::string> warn;
  if (!(f.varrho > 0.5 && f.varrho < 1.5))
    warn.push_back(fmt::format("functionals.varrho = {} is outside 1/2 < varrho < 3/2", f.varrho));
  if (c.audit.form == AuditForm::MainThm2) {
    if (f.vartheta > 2.0 / 3.0 * f.varrho)
      warn.push_back(fmt::format("functionals.vartheta = {} is outside 0 < vartheta <= (2/3) varrho", f.vartheta));
  } else if (f.vartheta > 0.5 * f.varrho - 0.25) {
    warn.push_back(fmt::format("functionals.vartheta = {} is outside 0 < vartheta <= varrho/2 - 1/4", f.vartheta));
  }
  if (f.q > 0.1) warn.push_back(fmt::format("functionals.q = {} is not small (0 < q << 1)", f.q));
  if (!std::isnan(f.ell) && f.ell < f.N + 0.5)
    warn.push_back(fmt::format("functionals.ell = {} is below N + 1/2", f.ell));
  if (f.N > 2 && g.velocity_points < 12)
    warn.push_back(fmt::format("velocity derivatives of order {} on {} points per axis are poorly resolved", f.N,
                               g.velocity_points));
  return warn;
}

LoadedConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  LoadedConfig out;
  const auto& sch = schema();
  for (const auto& [section, body] : tree) {
    if (section == "derived") continue;  // informational echo
    auto sit = sch.find(section);
    if (sit == sch.end()) {
      if (body.empty()) throw ConfigError(fmt::format("{}: key outside any section", section));
      throw ConfigError(fmt::format("{}: unknown section", section));
    }
    for (const auto& [key, node] : body) {
      const std::string path = section + "." + key;
      auto fit = sit->second.find(key);
      if (fit == sit->second.end()) throw ConfigError(fmt::format("{}: unknown key", path));
      fit->second.set(out.config, path, node.data());
    }
  }
  out.warnings = check_config(out.config);
  return out;
}

void set_config_value(RunConfig& config, const std::string& path, const std::string& value) {
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw ConfigError(fmt::format("{}: expected section.key", path));
  const auto& sch = schema();
  auto sit = sch.find(path.substr(0, dot));
  if (sit == sch.end()) throw ConfigError(fmt::format("{}: unknown section", path));
  auto fit = sit->second.find(path.substr(dot + 1));
  if (fit == sit->second.end()) throw ConfigError(fmt::format("{}: unknown key", path));
  fit->second.set(config, path, value);
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [section, fields] : schema()) {
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(config) + "\n";
    out += "\n";
  }
  const auto& f = config.functionals;
  if (f.N >= 1 && f.epsilon0 > 0.0) {
    const auto chain = minimal_chain(f.N, f.l_bar, SigmaTable(f.N, f.epsilon0));
    out += fmt::format(
        "[derived]\nell = {}\nl1 = {}\nell_tilde = {}\nell1 = {}\nell_bar0 = {}\nl0 = {}\nell0 = {}\nlH = {}\n",
        f.ell_value(), chain.l1, chain.ell_tilde, chain.ell1, chain.ell_bar0, chain.l0, chain.ell0, chain.lH);
  }
  return out;
}

}  // namespace vmb
