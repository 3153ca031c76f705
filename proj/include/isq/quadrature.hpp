#pragma once

// Quadrature on the reference tetrahedron by collapsed (Duffy) tensor Gauss rules.
// The collapse vertex carries the Jacobian factor (1-a)^2, so a rule collapsed at a
// singular vertex integrates |x-p|^{-2}-type integrands without evaluating at p.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "isq/error.hpp"

namespace isq {

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int q) {
  if (q < 1) throw Error(ErrorCode::OutOfRange, "gauss_legendre needs q >= 1");
  std::vector<double> x(q), w(q);
  for (int i = 0; i < q; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= q; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = q * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Points as barycentric coordinates (l0..l3), weights summing to 1 (volume fraction).
struct QuadratureRule {
  int order = 0;
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
};

/// Collapsed Gauss rule exact for polynomials of total degree <= order. The collapse
/// vertex is barycentric index 1: l1 = a, l2 = (1-a) b, l3 = (1-a)(1-b) c.
inline QuadratureRule collapsed_rule(int order) {
  if (order < 0) throw Error(ErrorCode::OutOfRange, "quadrature order must be >= 0");
  const int q = (order + 4) / 2;  // 2q - 1 >= order + 2
  const auto [x, w] = gauss_legendre(q);
  QuadratureRule r;
  r.order = order;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < q; ++k) {
        const double a = x[i], b = x[j], c = x[k];
        const double l1 = a, l2 = (1.0 - a) * b, l3 = (1.0 - a) * (1.0 - b) * c;
        r.points.push_back({1.0 - l1 - l2 - l3, l1, l2, l3});
        // Jacobian (1-a)^2 (1-b), reference volume 1/6 -> fraction factor 6.
        r.weights.push_back(6.0 * w[i] * w[j] * w[k] * (1.0 - a) * (1.0 - a) * (1.0 - b));
      }
  return r;
}

/// Cached rules; thread-safe.
inline const QuadratureRule& tet_rule(int order) {
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, collapsed_rule(order)).first;
  return it->second;
}

/// Rule whose collapse vertex is local vertex `v` (0..3) of the tetrahedron.
inline QuadratureRule collapsed_at(const QuadratureRule& base, int v) {
  QuadratureRule r = base;
  if (v == 1) return r;
  for (auto& p : r.points) std::swap(p[1], p[v]);
  return r;
}

}  // namespace isq
