#pragma once

/// @file
/// Proximal maps of convex conjugates used by the primal-dual solver.
///
/// Grouped vectors are stored channel-planar: a vector of length C*G holds
/// G per-pixel groups with C channels each, entry (c, p) at index c*G + p.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace mmcsr {

namespace detail {

inline Eigen::Index group_count(Eigen::Index size, std::size_t channels) {
  if (channels == 0) throw std::invalid_argument("prox: channel count must be positive");
  const auto c = static_cast<Eigen::Index>(channels);
  if (size % c != 0) throw std::invalid_argument("prox: length is not a multiple of the channel count");
  return size / c;
}

}  // namespace detail

/// prox of sigma * (weight * ||. - f||_1)^*: clamp(y - sigma f, -weight, weight).
inline void prox_l1_translated(Eigen::Ref<Eigen::VectorXd> y, const Eigen::Ref<const Eigen::VectorXd>& sigma,
                               const Eigen::Ref<const Eigen::VectorXd>& f, double weight = 1.0) {
  if (y.size() != sigma.size() || y.size() != f.size()) {
    throw std::invalid_argument("prox_l1_translated: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = std::clamp(y[i] - sigma[i] * f[i], -weight, weight);
  }
}

/// Projection of every group onto the alpha-ball: prox of (alpha ||.||_{2,1})^*.
inline void prox_l21_dual(Eigen::Ref<Eigen::VectorXd> y, std::size_t channels, double alpha) {
  const Eigen::Index groups = detail::group_count(y.size(), channels);
  const auto c = static_cast<Eigen::Index>(channels);
  for (Eigen::Index p = 0; p < groups; ++p) {
    double sq = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) sq += y[k * groups + p] * y[k * groups + p];
    const double norm = std::sqrt(sq);
    if (norm > alpha) {
      const double s = alpha > 0.0 ? alpha / norm : 0.0;
      for (Eigen::Index k = 0; k < c; ++k) y[k * groups + p] *= s;
    }
  }
}

/// prox of sigma * (alpha ||.||_{H^eps})^*, where the Huber norm is applied to
/// each group: y -> y / (1 + sigma eps / alpha), then projected onto the
/// alpha-ball. sigma must be constant within a group.
inline void prox_huber_dual(Eigen::Ref<Eigen::VectorXd> y, const Eigen::Ref<const Eigen::VectorXd>& sigma,
                            std::size_t channels, double alpha, double epsilon) {
  if (y.size() != sigma.size()) throw std::invalid_argument("prox_huber_dual: dimension mismatch");
  if (!(alpha > 0.0) || !(epsilon >= 0.0)) {
    throw std::invalid_argument("prox_huber_dual: need alpha > 0 and epsilon >= 0");
  }
  if (epsilon > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] /= 1.0 + sigma[i] * epsilon / alpha;
  }
  prox_l21_dual(y, channels, alpha);
}

/// Huber function of a scalar magnitude: r^2/(2 eps) below eps, r - eps/2 above.
inline double huber(double r, double epsilon) {
  r = std::abs(r);
  if (epsilon > 0.0 && r <= epsilon) return 0.5 * r * r / epsilon;
  return r - 0.5 * epsilon;
}

/// Sum over groups of the Euclidean group norm.
inline double l21_norm(const Eigen::Ref<const Eigen::VectorXd>& v, std::size_t channels) {
  const Eigen::Index groups = detail::group_count(v.size(), channels);
  const auto c = static_cast<Eigen::Index>(channels);
  double acc = 0.0;
  for (Eigen::Index p = 0; p < groups; ++p) {
    double sq = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) sq += v[k * groups + p] * v[k * groups + p];
    acc += std::sqrt(sq);
  }
  return acc;
}

/// Sum over groups of the Huber function of the group norm.
inline double huber_norm(const Eigen::Ref<const Eigen::VectorXd>& v, std::size_t channels, double epsilon) {
  const Eigen::Index groups = detail::group_count(v.size(), channels);
  const auto c = static_cast<Eigen::Index>(channels);
  double acc = 0.0;
  for (Eigen::Index p = 0; p < groups; ++p) {
    double sq = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) sq += v[k * groups + p] * v[k * groups + p];
    acc += huber(std::sqrt(sq), epsilon);
  }
  return acc;
}

}  // namespace mmcsr
