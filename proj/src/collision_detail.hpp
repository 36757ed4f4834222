#pragma once

#include <cmath>

#include "vmb/collision.hpp"

namespace vmb::detail {

// Visits every (u, omega) partner of output node iv with the quadrature
// weight K = |v-u|^gamma b(cos) w_omega w_u; the diagonal u = v is skipped.
template <class Fn>
void for_each_partner(const VelocityGrid& grid, const AngularQuadrature& aq, const CollisionKernel& kernel,
                      std::size_t iv, Fn&& fn) {
  const Vec3& v = grid.nodes[iv];
  const std::size_t nv = grid.size();
  for (std::size_t iu = 0; iu < nv; ++iu) {
    if (iu == iv) continue;
    const Vec3& u = grid.nodes[iu];
    const Vec3 z{v[0] - u[0], v[1] - u[1], v[2] - u[2]};
    const double r = std::sqrt(norm2(z));
    const double radial = std::pow(r, kernel.gamma) * grid.quad_weights[iu];
    for (std::size_t a = 0; a < aq.nodes.size(); ++a) {
      const Vec3& w = aq.nodes[a];
      const double zw = dot(z, w);
      const double K = radial * kernel.b(zw / r) * aq.weights[a];
      if (K == 0.0) continue;
      const Vec3 vp{v[0] - zw * w[0], v[1] - zw * w[1], v[2] - zw * w[2]};
      const Vec3 up{u[0] + zw * w[0], u[1] + zw * w[1], u[2] + zw * w[2]};
      fn(iu, K, vp, up);
    }
  }
}

}  // namespace vmb::detail
