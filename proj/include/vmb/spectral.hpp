#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "vmb/grid.hpp"

namespace vmb {

using cplx = std::complex<double>;

// Complex FFTs on the periodic spatial grid. Plans are built once with
// FFTW_ESTIMATE | FFTW_UNALIGNED so execution is deterministic and safe on
// arbitrary (thread-local) buffers.
class SpectralOps {
 public:
  explicit SpectralOps(const SpatialGrid& grid);
  ~SpectralOps();
  SpectralOps(const SpectralOps&) = delete;
  SpectralOps& operator=(const SpectralOps&) = delete;

  const SpatialGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }

  // Unnormalized forward transform.
  void forward(std::span<const double> in, std::span<cplx> out) const;
  void forward(std::span<const cplx> in, std::span<cplx> out) const;
  // Inverse including the 1/N factor; keeps the real part.
  void inverse(std::span<const cplx> in, std::span<double> out) const;
  void inverse(std::span<const cplx> in, std::span<cplx> out) const;

  // In-place transforms of `count` interleaved fields stored node-major
  // (field c of node i at data[i * count + c]). Inverse includes 1/N.
  void forward_batch(std::span<cplx> data, std::size_t count) const;
  void inverse_batch(std::span<cplx> data, std::size_t count) const;

  // Fourier multiplier of the derivative d^alpha for mode idx; odd orders on
  // a Nyquist axis map to zero so real fields stay real.
  cplx derivative_symbol(std::size_t idx, const MultiIndex& alpha) const;

  // Wavevector seen by first derivatives: components on unused axes and on
  // Nyquist axes are zero.
  Vec3 effective_wavevector(std::size_t idx) const;

  std::vector<double> derivative(std::span<const double> field, const MultiIndex& alpha) const;
  std::vector<double> divergence(const std::array<std::vector<double>, 3>& v) const;
  std::array<std::vector<double>, 3> gradient(std::span<const double> field) const;
  std::array<std::vector<double>, 3> curl(const std::array<std::vector<double>, 3>& v) const;

  // Parseval-consistent spatial L2 norm squared of a real field.
  double l2_squared(std::span<const double> field) const;

 private:
  SpatialGrid grid_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

// Convenience wrapper for the spec-level operation.
std::vector<double> spatial_derivative(std::span<const double> field, const SpatialGrid& grid,
                                       const MultiIndex& alpha);

}  // namespace vmb
