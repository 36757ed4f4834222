#include "vmb/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vmb/errors.hpp"

namespace vmb {

double maxwellian(const Vec3& v) {
  constexpr double norm = 0.063493635934240969;  // (2 pi)^{-3/2}
  return norm * std::exp(-0.5 * norm2(v));
}

std::size_t VelocityGrid::mirror(std::size_t idx) const {
  const auto n = static_cast<std::size_t>(points_per_axis);
  const std::size_t k = idx % n;
  const std::size_t j = (idx / n) % n;
  const std::size_t i = idx / (n * n);
  return index(static_cast<int>(n - 1 - i), static_cast<int>(n - 1 - j), static_cast<int>(n - 1 - k));
}

double VelocityGrid::maxwellian_mass_tolerance() const {
  const double alias = 2.0 * std::exp(-2.0 * std::numbers::pi * std::numbers::pi / (spacing * spacing));
  const double tail = std::erfc(v_max / std::numbers::sqrt2);
  return 3.0 * (alias + tail) * 1.05 + 1e-14;
}

VelocityGrid build_velocity_grid(int points_per_axis, double v_max) {
  if (points_per_axis < 4 || points_per_axis % 2 != 0)
    throw GridError("velocity points per axis must be even and >= 4, got " + std::to_string(points_per_axis));
  if (!(v_max > 0.0)) throw GridError("v_max must be positive");

  VelocityGrid g;
  g.points_per_axis = points_per_axis;
  g.v_max = v_max;
  g.spacing = 2.0 * v_max / points_per_axis;
  const int n = points_per_axis;
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  g.nodes.resize(total);
  g.quad_weights.assign(total, g.spacing * g.spacing * g.spacing);
  g.maxwellian.resize(total);
  g.sqrt_maxwellian.resize(total);
  g.bracket_v.resize(total);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = g.index(i, j, k);
        const Vec3 v{g.coord(i), g.coord(j), g.coord(k)};
        g.nodes[idx] = v;
        g.maxwellian[idx] = maxwellian(v);
        g.sqrt_maxwellian[idx] = std::sqrt(g.maxwellian[idx]);
        g.bracket_v[idx] = std::sqrt(1.0 + norm2(v));
      }
  return g;
}

double velocity_integral(std::span<const double> g, const VelocityGrid& grid) {
  if (g.size() != grid.size()) throw ShapeError("velocity_integral: size mismatch");
  // Pairwise v/-v summation makes odd integrands cancel exactly.
  double s = 0.0;
  const std::size_t half = grid.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const std::size_t m = grid.mirror(i);
    s += grid.quad_weights[i] * g[i] + grid.quad_weights[m] * g[m];
  }
  return s;
}

namespace {

// First or second derivative along one axis of a row-major n^3 array.
void derivative_axis(const double* in, double* out, int n, double h, int axis, int ord) {
  const std::size_t nn = static_cast<std::size_t>(n);
  const std::size_t stride = axis == 0 ? nn * nn : (axis == 1 ? nn : 1);
  const double inv_h = 1.0 / h;
  const double inv_h2 = inv_h * inv_h;
  for (std::size_t base = 0; base < nn * nn * nn; ++base) {
    const std::size_t pos = (base / stride) % nn;
    const auto at = [&](long off) { return in[static_cast<std::size_t>(static_cast<long>(base) + off * static_cast<long>(stride))]; };
    double d;
    if (ord == 1) {
      if (pos == 0)
        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * 0.5 * inv_h;
      else if (pos == nn - 1)
        d = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * 0.5 * inv_h;
      else
        d = (at(1) - at(-1)) * 0.5 * inv_h;
    } else {
      if (pos == 0)
        d = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) * inv_h2;
      else if (pos == nn - 1)
        d = (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) * inv_h2;
      else
        d = (at(1) - 2.0 * at(0) + at(-1)) * inv_h2;
    }
    out[base] = d;
  }
}

}  // namespace

std::vector<double> velocity_derivative(std::span<const double> g, const VelocityGrid& grid,
                                        const MultiIndex& beta) {
  if (g.size() != grid.size()) throw ShapeError("velocity_derivative: size mismatch");
  std::vector<double> cur(g.begin(), g.end());
  std::vector<double> tmp(cur.size());
  for (int axis = 0; axis < 3; ++axis) {
    if (beta[axis] < 0 || beta[axis] > 2)
      throw GridError("velocity_derivative: per-axis order must be in [0, 2]");
    if (beta[axis] == 0) continue;
    derivative_axis(cur.data(), tmp.data(), grid.points_per_axis, grid.spacing, axis, beta[axis]);
    cur.swap(tmp);
  }
  return cur;
}

std::size_t SpatialGrid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(points_per_axis);
  return s;
}

double SpatialGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= box_length[a] / points_per_axis;
  return v;
}

double SpatialGrid::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= box_length[a];
  return v;
}

Vec3 SpatialGrid::wavevector(std::size_t idx) const {
  Vec3 k{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) k[a] = 2.0 * std::numbers::pi * wavenumbers[idx][a] / box_length[a];
  return k;
}

Vec3 SpatialGrid::position(std::size_t idx) const {
  Vec3 x{0.0, 0.0, 0.0};
  const auto n = static_cast<std::size_t>(points_per_axis);
  for (int a = dim - 1; a >= 0; --a) {
    x[a] = static_cast<double>(idx % n) * box_length[a] / points_per_axis;
    idx /= n;
  }
  return x;
}

SpatialGrid build_spatial_grid(int dim, int points_per_axis, double box_length) {
  if (dim < 1 || dim > 3) throw GridError("spatial dim must be 1, 2 or 3");
  if (points_per_axis < 2 || (points_per_axis & (points_per_axis - 1)) != 0)
    throw GridError("spatial points per axis must be a power of two");
  if (!(box_length > 0.0)) throw GridError("box length must be positive");
  SpatialGrid s;
  s.dim = dim;
  s.points_per_axis = points_per_axis;
  s.box_length = {box_length, box_length, box_length};
  const std::size_t total = s.size();
  s.wavenumbers.resize(total, {0, 0, 0});
  const int n = points_per_axis;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t r = idx;
    for (int a = dim - 1; a >= 0; --a) {
      const int i = static_cast<int>(r % static_cast<std::size_t>(n));
      r /= static_cast<std::size_t>(n);
      s.wavenumbers[idx][a] = i < n / 2 ? i : i - n;
    }
  }
  return s;
}

}  // namespace vmb
