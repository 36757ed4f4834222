#include "vmb/conservation.hpp"

#include <algorithm>
#include <cmath>

#include "vmb/errors.hpp"
#include "vmb/macromicro.hpp"

namespace vmb {

namespace {

using Field = std::vector<double>;

Field combine(std::initializer_list<std::pair<double, const Field*>> terms, std::size_t n) {
  Field out(n, 0.0);
  for (const auto& [c, f] : terms)
    for (std::size_t i = 0; i < n; ++i) out[i] += c * (*f)[i];
  return out;
}

double l2(const SpectralOps& ops, const VectorField& v) {
  return std::sqrt(ops.l2_squared(v[0]) + ops.l2_squared(v[1]) + ops.l2_squared(v[2]));
}

VectorField make_vec(std::size_t n) { return zero_vector_field(n); }

// Residual of sum(terms) with the terms' individual norms.
struct Terms {
  std::vector<VectorField> items;
  double reference = 0.0;  // extra scale not entering the sum
  void add(VectorField v) { items.push_back(std::move(v)); }
  void add_scalar(Field s) {
    const std::size_t n = s.size();
    items.push_back({std::move(s), Field(n, 0.0), Field(n, 0.0)});
  }
  std::pair<double, double> evaluate(const SpectralOps& ops) const {
    const std::size_t n = ops.size();
    VectorField sum = make_vec(n);
    double largest = reference;
    for (const auto& t : items) {
      largest = std::max(largest, l2(ops, t));
      for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < n; ++i) sum[a][i] += t[a][i];
    }
    return {l2(ops, sum), largest};
  }
};

}  // namespace

std::string law_name(Law law) {
  switch (law) {
    case Law::Mass: return "mass";
    case Law::Momentum: return "momentum";
    case Law::Energy: return "energy";
    case Law::Charge: return "charge";
    case Law::Ampere: return "ampere";
    case Law::Faraday: return "faraday";
    case Law::GaussE: return "gauss_E";
    case Law::GaussB: return "gauss_B";
  }
  return "?";
}

double LawSeries::sup_absolute() const { return absolute.empty() ? 0.0 : *std::max_element(absolute.begin(), absolute.end()); }
double LawSeries::sup_normalized() const {
  return normalized.empty() ? 0.0 : *std::max_element(normalized.begin(), normalized.end());
}
double LawSeries::sup_scaled() const {
  const double s = term_scale.empty() ? 0.0 : *std::max_element(term_scale.begin(), term_scale.end());
  return s > 0.0 ? sup_absolute() / s : 0.0;
}
double LawSeries::sup_scaled_interior() const {
  if (absolute.size() < 3) return sup_scaled();
  const double s = *std::max_element(term_scale.begin(), term_scale.end());
  const double a = *std::max_element(absolute.begin() + 1, absolute.end() - 1);
  return s > 0.0 ? a / s : 0.0;
}

const LawSeries& ConservationReport::at(Law law) const {
  for (const auto& l : laws)
    if (l.law == law) return l;
  throw TrajectoryError("law not present in report: " + law_name(law));
}

ConservationAudit::ConservationAudit(const LinearizedOperator& op, const VelocityGrid& vgrid, const SpatialGrid& sgrid,
                                     double eps)
    : vgrid_(vgrid), ops_(sgrid), eps_(eps) {
  if (!(eps > 0.0)) throw ConfigError("conservation audit: eps must be positive");
  if (op.velocity_dofs() != vgrid.size()) throw ShapeError("conservation audit: operator/grid mismatch");
  const auto sol = transport_solutions(op, vgrid);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(op.size()), 12);
  for (int c = 0; c < 9; ++c) phi.col(c) = sol.viscous[c];
  for (int c = 0; c < 3; ++c) phi.col(9 + c) = sol.thermal[c];
  // <Phi, (1/eps) L (f/2)> = (w / 2 eps) (L Phi)^T f by symmetry of L.
  flux_ = op.matrix() * phi;
}

ConservationSample ConservationAudit::sample(const SpeciesPair& f, const EMState& em, double t) const {
  const auto m = fluid_moments(f, eps_, vgrid_);
  ConservationSample s;
  s.t = t;
  s.rho = m.rho;
  s.theta = m.theta;
  s.n = m.n;
  s.u = m.u;
  s.j = m.j;
  s.E = em.E;
  s.B = em.B;
  const auto nv = static_cast<Eigen::Index>(vgrid_.size());
  const double scale = vgrid_.quad_weights[0] / (2.0 * eps_);
  const Eigen::MatrixXd F = scale * (flux_.topRows(nv).transpose() * f.block(0) + flux_.bottomRows(nv).transpose() * f.block(1));
  auto row = [&](Eigen::Index r) {
    Field out(static_cast<std::size_t>(F.cols()));
    for (Eigen::Index x = 0; x < F.cols(); ++x) out[static_cast<std::size_t>(x)] = F(r, x);
    return out;
  };
  for (int c = 0; c < 9; ++c) s.stress[c] = row(c);
  for (int c = 0; c < 3; ++c) s.heat[c] = row(9 + c);
  return s;
}

ConservationReport ConservationAudit::residual(std::span<const ConservationSample> samples) const {
  const std::size_t K = samples.size();
  if (K < 3) throw TrajectoryError("conservation residuals need at least 3 frames");
  const double dt = samples[1].t - samples[0].t;
  if (!(dt > 0.0)) throw TrajectoryError("frames must have increasing times");
  for (std::size_t k = 1; k < K; ++k)
    if (std::abs(samples[k].t - samples[k - 1].t - dt) > 1e-9 * std::max(1.0, std::abs(samples[k].t)))
      throw TrajectoryError("frames are not uniformly spaced in time");
  const std::size_t n = ops_.size();
  for (const auto& s : samples)
    if (s.rho.size() != n) throw ShapeError("sample does not match the spatial grid");

  auto ddt = [&](std::size_t k, auto get) {
    const Field* a;
    const Field* b;
    const Field* c;
    if (k == 0) {
      a = &get(samples[0]), b = &get(samples[1]), c = &get(samples[2]);
      return combine({{-1.5 / dt, a}, {2.0 / dt, b}, {-0.5 / dt, c}}, n);
    }
    if (k == K - 1) {
      a = &get(samples[K - 1]), b = &get(samples[K - 2]), c = &get(samples[K - 3]);
      return combine({{1.5 / dt, a}, {-2.0 / dt, b}, {0.5 / dt, c}}, n);
    }
    a = &get(samples[k + 1]), b = &get(samples[k - 1]);
    return combine({{0.5 / dt, a}, {-0.5 / dt, b}}, n);
  };
  auto ddt_vec = [&](std::size_t k, auto get) {
    VectorField out;
    for (int a = 0; a < 3; ++a) out[a] = ddt(k, [&](const ConservationSample& s) -> const Field& { return get(s)[a]; });
    return out;
  };
  auto scaled = [](Field f, double c) {
    for (double& x : f) x *= c;
    return f;
  };
  auto scaled_vec = [&](VectorField v, double c) {
    for (auto& comp : v) comp = scaled(std::move(comp), c);
    return v;
  };

  ConservationReport rep;
  for (Law law : kAllLaws) rep.laws.push_back({law, {}, {}});
  for (std::size_t k = 0; k < K; ++k) {
    const auto& s = samples[k];
    rep.t.push_back(s.t);
    const double eps = eps_;
    std::array<Terms, 8> T;

    T[0].add_scalar(ddt(k, [](const ConservationSample& x) -> const Field& { return x.rho; }));
    T[0].add_scalar(scaled(ops_.divergence(s.u), 1.0 / eps));

    T[1].add(ddt_vec(k, [](const ConservationSample& x) -> const VectorField& { return x.u; }));
    {
      Field p = combine({{1.0, &s.rho}, {1.0, &s.theta}}, n);
      T[1].add(scaled_vec(ops_.gradient(p), 1.0 / eps));
      VectorField div_stress;
      for (int i = 0; i < 3; ++i) div_stress[i] = ops_.divergence({s.stress[3 * i], s.stress[3 * i + 1], s.stress[3 * i + 2]});
      T[1].add(std::move(div_stress));
      VectorField lorentz = make_vec(n);
      for (std::size_t x = 0; x < n; ++x) {
        const Vec3 j{s.j[0][x], s.j[1][x], s.j[2][x]}, B{s.B[0][x], s.B[1][x], s.B[2][x]};
        const Vec3 jb = cross(j, B);
        for (int a = 0; a < 3; ++a) lorentz[a][x] = -0.5 * (s.n[x] * s.E[a][x] + jb[a]);
      }
      T[1].add(std::move(lorentz));
    }

    T[2].add_scalar(ddt(k, [](const ConservationSample& x) -> const Field& { return x.theta; }));
    T[2].add_scalar(scaled(ops_.divergence(s.u), 2.0 / (3.0 * eps)));
    T[2].add_scalar(scaled(ops_.divergence(s.heat), 2.0 / 3.0));
    {
      Field je(n, 0.0);
      for (std::size_t x = 0; x < n; ++x)
        for (int a = 0; a < 3; ++a) je[x] -= eps / 3.0 * s.j[a][x] * s.E[a][x];
      T[2].add_scalar(std::move(je));
    }

    T[3].add_scalar(ddt(k, [](const ConservationSample& x) -> const Field& { return x.n; }));
    T[3].add_scalar(ops_.divergence(s.j));

    T[4].add(ddt_vec(k, [](const ConservationSample& x) -> const VectorField& { return x.E; }));
    T[4].add(scaled_vec(ops_.curl(s.B), -1.0));
    T[4].add(s.j);

    T[5].add(ddt_vec(k, [](const ConservationSample& x) -> const VectorField& { return x.B; }));
    T[5].add(ops_.curl(s.E));

    T[6].add_scalar(ops_.divergence(s.E));
    T[6].add_scalar(scaled(s.n, -1.0));

    T[7].add_scalar(ops_.divergence(s.B));
    {
      double g = 0.0;
      for (int a = 0; a < 3; ++a) {
        const auto grad = ops_.gradient(s.B[a]);
        for (int b = 0; b < 3; ++b) g += ops_.l2_squared(grad[b]);
      }
      T[7].reference = std::sqrt(g);
    }

    for (std::size_t l = 0; l < T.size(); ++l) {
      const auto [abs, scale] = T[l].evaluate(ops_);
      rep.laws[l].absolute.push_back(abs);
      rep.laws[l].term_scale.push_back(scale);
    }
  }
  for (auto& law : rep.laws) {
    const double top = *std::max_element(law.term_scale.begin(), law.term_scale.end());
    for (std::size_t k = 0; k < K; ++k) {
      const double d = std::max(law.term_scale[k], 1e-12 * top);
      law.normalized.push_back(d > 0.0 ? law.absolute[k] / d : 0.0);
    }
  }
  return rep;
}

ConservationReport conservation_residual(std::span<const Frame> frames, double eps, const LinearizedOperator& op,
                                         const VelocityGrid& vgrid, const SpatialGrid& sgrid) {
  if (frames.size() < 3) throw TrajectoryError("conservation residuals need at least 3 frames");
  const ConservationAudit audit(op, vgrid, sgrid, eps);
  std::vector<ConservationSample> samples;
  samples.reserve(frames.size());
  for (const auto& fr : frames) samples.push_back(audit.sample(fr.f, fr.em, fr.t));
  return audit.residual(samples);
}

}  // namespace vmb
