#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace vmb {

using Vec3 = std::array<double, 3>;
using MultiIndex = std::array<int, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec3& a) { return dot(a, a); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline int order(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

double maxwellian(const Vec3& v);  // (2 pi)^{-3/2} exp(-|v|^2/2)

// Cell-centred uniform grid on [-v_max, v_max]^3. Node (i,j,k) is stored at
// (i*n + j)*n + k, i.e. the first velocity axis varies slowest.
struct VelocityGrid {
  int points_per_axis = 0;
  double v_max = 0.0;
  double spacing = 0.0;
  std::vector<Vec3> nodes;
  std::vector<double> quad_weights;
  std::vector<double> maxwellian;
  std::vector<double> sqrt_maxwellian;
  std::vector<double> bracket_v;  // <v> = sqrt(1 + |v|^2)

  std::size_t size() const { return nodes.size(); }
  std::size_t index(int i, int j, int k) const {
    const auto n = static_cast<std::size_t>(points_per_axis);
    return (static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n + static_cast<std::size_t>(k);
  }
  double coord(int i) const { return (i + 0.5 - 0.5 * points_per_axis) * spacing; }
  // Index of the node obtained by v -> -v.
  std::size_t mirror(std::size_t idx) const;
  // Documented lower bound of sum w*M: per-axis aliasing error of the
  // midpoint rule plus the Gaussian tail beyond v_max.
  double maxwellian_mass_tolerance() const;
};

VelocityGrid build_velocity_grid(int points_per_axis, double v_max);

double velocity_integral(std::span<const double> g, const VelocityGrid& grid);

// Second-order central differences, one-sided second-order at the faces.
// Per-axis order at most 2.
std::vector<double> velocity_derivative(std::span<const double> g, const VelocityGrid& grid,
                                        const MultiIndex& beta);

struct SpatialGrid {
  int dim = 2;
  int points_per_axis = 16;
  std::array<double, 3> box_length{1.0, 1.0, 1.0};
  // Integer wavenumber per axis for every Fourier mode, in FFT order
  // (unused axes are 0).
  std::vector<std::array<int, 3>> wavenumbers;

  std::size_t size() const;
  double cell_volume() const;
  double volume() const;
  // Physical wavevector 2 pi m / L of mode idx.
  Vec3 wavevector(std::size_t idx) const;
  bool is_nyquist(std::size_t idx, int axis) const {
    return wavenumbers[idx][axis] == -points_per_axis / 2;
  }
  // Coordinates of spatial node idx.
  Vec3 position(std::size_t idx) const;
};

SpatialGrid build_spatial_grid(int dim, int points_per_axis, double box_length);

}  // namespace vmb
