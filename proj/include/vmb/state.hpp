#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vmb {

// Species charge vectors: q1 = [1, -1], q2 = [1, 1]; q0 = diag(1, -1) acts as
// multiplication by the q1 entry of each species.
inline constexpr std::array<double, 2> kQ1{1.0, -1.0};
inline constexpr std::array<double, 2> kQ2{1.0, 1.0};

// Two-species perturbation on phase space. Storage is species-major, then
// spatial node, then velocity node (velocity contiguous).
class SpeciesPair {
 public:
  using ColMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstColMap = Eigen::Map<const Eigen::MatrixXd>;

  SpeciesPair() = default;
  SpeciesPair(std::size_t spatial_nodes, std::size_t velocity_nodes)
      : nx_(spatial_nodes), nv_(velocity_nodes), values_(2 * spatial_nodes * velocity_nodes, 0.0) {}

  std::size_t spatial_nodes() const { return nx_; }
  std::size_t velocity_nodes() const { return nv_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> species(int s) { return {values_.data() + offset(s, 0), nx_ * nv_}; }
  std::span<const double> species(int s) const { return {values_.data() + offset(s, 0), nx_ * nv_}; }
  std::span<double> slice(int s, std::size_t ix) { return {values_.data() + offset(s, ix), nv_}; }
  std::span<const double> slice(int s, std::size_t ix) const { return {values_.data() + offset(s, ix), nv_}; }
  double& at(int s, std::size_t ix, std::size_t iv) { return values_[offset(s, ix) + iv]; }
  double at(int s, std::size_t ix, std::size_t iv) const { return values_[offset(s, ix) + iv]; }

  // Species block viewed as an nv x nx column-major matrix (column = node).
  ColMap block(int s) { return ColMap(values_.data() + offset(s, 0), static_cast<Eigen::Index>(nv_), static_cast<Eigen::Index>(nx_)); }
  ConstColMap block(int s) const {
    return ConstColMap(values_.data() + offset(s, 0), static_cast<Eigen::Index>(nv_), static_cast<Eigen::Index>(nx_));
  }

  // Stacked [f+(x), f-(x)] velocity vector at one spatial node.
  Eigen::VectorXd node_vector(std::size_t ix) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * nv_));
    for (int s = 0; s < 2; ++s)
      for (std::size_t i = 0; i < nv_; ++i) out(static_cast<Eigen::Index>(s * nv_ + i)) = at(s, ix, i);
    return out;
  }
  void set_node_vector(std::size_t ix, const Eigen::VectorXd& g) {
    for (int s = 0; s < 2; ++s)
      for (std::size_t i = 0; i < nv_; ++i) at(s, ix, i) = g(static_cast<Eigen::Index>(s * nv_ + i));
  }

  bool finite() const {
    for (double x : values_)
      if (!std::isfinite(x)) return false;
    return true;
  }
  bool same_shape(const SpeciesPair& o) const { return nx_ == o.nx_ && nv_ == o.nv_; }

  SpeciesPair& operator+=(const SpeciesPair& o) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  SpeciesPair& operator*=(double a) {
    for (double& x : values_) x *= a;
    return *this;
  }
  void axpy(double a, const SpeciesPair& o) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * o.values_[i];
  }

  double time_stamp = 0.0;

 private:
  std::size_t offset(int s, std::size_t ix) const { return (static_cast<std::size_t>(s) * nx_ + ix) * nv_; }

  std::size_t nx_ = 0;
  std::size_t nv_ = 0;
  std::vector<double> values_;
};

using VectorField = std::array<std::vector<double>, 3>;

inline VectorField zero_vector_field(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

struct EMState {
  VectorField E;
  VectorField B;
  double t = 0.0;

  EMState() = default;
  explicit EMState(std::size_t spatial_nodes) : E(zero_vector_field(spatial_nodes)), B(zero_vector_field(spatial_nodes)) {}
  std::size_t spatial_nodes() const { return E[0].size(); }
};

struct Frame {
  double t = 0.0;
  SpeciesPair f;
  EMState em;
};

}  // namespace vmb
