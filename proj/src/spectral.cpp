#include "vmb/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "vmb/errors.hpp"

namespace vmb {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const cplx* p) { return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p)); }
}  // namespace

struct SpectralOps::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::mutex batch_mutex;
  std::map<std::size_t, std::pair<fftw_plan, fftw_plan>> batch;
};

SpectralOps::SpectralOps(const SpatialGrid& grid) : grid_(grid), plans_(std::make_unique<Plans>()) {
  std::vector<int> dims(static_cast<std::size_t>(grid.dim), grid.points_per_axis);
  std::vector<cplx> a(grid.size()), b(grid.size());
  std::lock_guard lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->fwd = fftw_plan_dft(grid.dim, dims.data(), as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
  plans_->bwd = fftw_plan_dft(grid.dim, dims.data(), as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
  if (!plans_->fwd || !plans_->bwd) throw ResourceError("FFTW planning failed");
}

SpectralOps::~SpectralOps() {
  std::lock_guard lock(planner_mutex());
  if (plans_->fwd) fftw_destroy_plan(plans_->fwd);
  if (plans_->bwd) fftw_destroy_plan(plans_->bwd);
  for (auto& [count, p] : plans_->batch) {
    fftw_destroy_plan(p.first);
    fftw_destroy_plan(p.second);
  }
}

namespace {
std::pair<fftw_plan, fftw_plan> make_batch_plans(const SpatialGrid& grid, std::size_t count) {
  std::vector<int> dims(static_cast<std::size_t>(grid.dim), grid.points_per_axis);
  std::vector<cplx> a(grid.size() * count);
  const int howmany = static_cast<int>(count);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  auto* p = as_fftw(a.data());
  fftw_plan f = fftw_plan_many_dft(grid.dim, dims.data(), howmany, p, nullptr, howmany, 1, p, nullptr, howmany, 1,
                                   FFTW_FORWARD, flags);
  fftw_plan b = fftw_plan_many_dft(grid.dim, dims.data(), howmany, p, nullptr, howmany, 1, p, nullptr, howmany, 1,
                                   FFTW_BACKWARD, flags);
  if (!f || !b) throw ResourceError("FFTW batch planning failed");
  return {f, b};
}
}  // namespace

void SpectralOps::forward_batch(std::span<cplx> data, std::size_t count) const {
  if (data.size() != size() * count) throw ShapeError("forward_batch: size mismatch");
  fftw_plan plan;
  {
    std::lock_guard lock(plans_->batch_mutex);
    auto it = plans_->batch.find(count);
    if (it == plans_->batch.end()) it = plans_->batch.emplace(count, make_batch_plans(grid_, count)).first;
    plan = it->second.first;
  }
  fftw_execute_dft(plan, as_fftw(data.data()), as_fftw(data.data()));
}

void SpectralOps::inverse_batch(std::span<cplx> data, std::size_t count) const {
  if (data.size() != size() * count) throw ShapeError("inverse_batch: size mismatch");
  fftw_plan plan;
  {
    std::lock_guard lock(plans_->batch_mutex);
    auto it = plans_->batch.find(count);
    if (it == plans_->batch.end()) it = plans_->batch.emplace(count, make_batch_plans(grid_, count)).first;
    plan = it->second.second;
  }
  fftw_execute_dft(plan, as_fftw(data.data()), as_fftw(data.data()));
  const double s = 1.0 / static_cast<double>(size());
  for (auto& c : data) c *= s;
}

void SpectralOps::forward(std::span<const double> in, std::span<cplx> out) const {
  if (in.size() != size() || out.size() != size()) throw ShapeError("forward: size mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = cplx(in[i], 0.0);
  fftw_execute_dft(plans_->fwd, as_fftw(out.data()), as_fftw(out.data()));
}

void SpectralOps::forward(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != size() || out.size() != size()) throw ShapeError("forward: size mismatch");
  fftw_execute_dft(plans_->fwd, as_fftw(in.data()), as_fftw(out.data()));
}

void SpectralOps::inverse(std::span<const cplx> in, std::span<double> out) const {
  if (in.size() != size() || out.size() != size()) throw ShapeError("inverse: size mismatch");
  std::vector<cplx> tmp(in.begin(), in.end());
  fftw_execute_dft(plans_->bwd, as_fftw(tmp.data()), as_fftw(tmp.data()));
  const double s = 1.0 / static_cast<double>(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tmp[i].real() * s;
}

void SpectralOps::inverse(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != size() || out.size() != size()) throw ShapeError("inverse: size mismatch");
  fftw_execute_dft(plans_->bwd, as_fftw(in.data()), as_fftw(out.data()));
  const double s = 1.0 / static_cast<double>(size());
  for (auto& c : out) c *= s;
}

cplx SpectralOps::derivative_symbol(std::size_t idx, const MultiIndex& alpha) const {
  const Vec3 k = grid_.wavevector(idx);
  cplx m(1.0, 0.0);
  for (int a = 0; a < 3; ++a) {
    if (alpha[a] == 0) continue;
    if (a >= grid_.dim) return cplx(0.0, 0.0);
    if (alpha[a] % 2 == 1 && grid_.is_nyquist(idx, a)) return cplx(0.0, 0.0);
    for (int p = 0; p < alpha[a]; ++p) m *= cplx(0.0, k[a]);
  }
  return m;
}

Vec3 SpectralOps::effective_wavevector(std::size_t idx) const {
  Vec3 k = grid_.wavevector(idx);
  for (int a = 0; a < 3; ++a)
    if (a >= grid_.dim || grid_.is_nyquist(idx, a)) k[a] = 0.0;
  return k;
}

std::vector<double> SpectralOps::derivative(std::span<const double> field, const MultiIndex& alpha) const {
  for (int a = 0; a < 3; ++a) {
    if (alpha[a] < 0) throw GridError("negative derivative order");
    if (alpha[a] > 0 && a >= grid_.dim) throw GridError("derivative along an axis beyond the spatial dimension");
  }
  std::vector<cplx> hat(size());
  forward(field, hat);
  for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= derivative_symbol(i, alpha);
  std::vector<double> out(size());
  inverse(hat, out);
  return out;
}

std::vector<double> SpectralOps::divergence(const std::array<std::vector<double>, 3>& v) const {
  std::vector<double> out(size(), 0.0);
  for (int a = 0; a < grid_.dim; ++a) {
    MultiIndex e{0, 0, 0};
    e[a] = 1;
    const auto d = derivative(v[a], e);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  }
  return out;
}

std::array<std::vector<double>, 3> SpectralOps::gradient(std::span<const double> field) const {
  std::array<std::vector<double>, 3> g;
  for (int a = 0; a < 3; ++a) {
    if (a >= grid_.dim) {
      g[a].assign(size(), 0.0);
      continue;
    }
    MultiIndex e{0, 0, 0};
    e[a] = 1;
    g[a] = derivative(field, e);
  }
  return g;
}

std::array<std::vector<double>, 3> SpectralOps::curl(const std::array<std::vector<double>, 3>& v) const {
  // d_a v_b computed once per pair; axes beyond dim have zero derivative.
  const auto d = [&](int a, int b) -> std::vector<double> {
    if (a >= grid_.dim) return std::vector<double>(size(), 0.0);
    MultiIndex e{0, 0, 0};
    e[a] = 1;
    return derivative(v[b], e);
  };
  std::array<std::vector<double>, 3> c;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    const auto djvk = d(j, k);
    const auto dkvj = d(k, j);
    c[i].resize(size());
    for (std::size_t n = 0; n < size(); ++n) c[i][n] = djvk[n] - dkvj[n];
  }
  return c;
}

double SpectralOps::l2_squared(std::span<const double> field) const {
  double s = 0.0;
  for (double x : field) s += x * x;
  return s * grid_.cell_volume();
}

std::vector<double> spatial_derivative(std::span<const double> field, const SpatialGrid& grid,
                                       const MultiIndex& alpha) {
  SpectralOps ops(grid);
  return ops.derivative(field, alpha);
}

}  // namespace vmb
