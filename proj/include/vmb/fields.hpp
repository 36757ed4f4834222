#pragma once

#include <utility>

#include "vmb/grid.hpp"
#include "vmb/spectral.hpp"
#include "vmb/state.hpp"

namespace vmb {

// Exact free Maxwell evolution of one Fourier mode over tau (no-op at k = 0).
void rotate_mode(const Vec3& k, double tau, std::array<cplx, 3>& E, std::array<cplx, 3>& B);

// Advances dE/dt = curl B - j, dB/dt = -curl E over dt. The curl part is an
// exact rotation per Fourier mode; the source enters by the midpoint rule
// (j held at its supplied value, the rotation applied over dt/2 to it).
// Mode k = 0 (and pure Nyquist modes, where the spectral curl vanishes): B
// frozen, E advanced by -dt * j_hat.
EMState maxwell_step(const EMState& state, const VectorField& current, double dt, const SpectralOps& ops);

// (||div E - n||_2, ||div B||_2) with the spatial L2 norm.
std::pair<double, double> gauss_residuals(const EMState& state, const SpeciesPair& f, const VelocityGrid& vgrid,
                                          const SpectralOps& ops);

// -(1/eps) q0 (eps E + v x B) . grad_v f + (1/eps)(E . v) sqrt(M) q1 + 1/2 q0 (E . v) f,
// with the per-node discrete mass defect removed along sqrt(M).
SpeciesPair force_terms(const SpeciesPair& f, const EMState& em, double eps, const VelocityGrid& vgrid);

// Field minus its longitudinal part on modes k != 0; the mean is kept.
VectorField transverse_part(const VectorField& v, const SpectralOps& ops);

// Electromagnetic energy 1/2 (||E||^2 + ||B||^2).
double field_energy(const EMState& em, const SpectralOps& ops);

}  // namespace vmb
