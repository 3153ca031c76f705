#pragma once

// Domain geometry, singular points and the potential V = sum_p Z(p) chi_p / rho^2 + V_smooth.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "isq/error.hpp"

namespace isq {

using Point = Eigen::Vector3d;

enum class DomainKind { Torus3, Ball };

/// Unit cubic torus R^3 / Z^3, or a ball of radius R centred at the origin with a
/// Dirichlet wall at r = R.
struct Domain {
  DomainKind kind = DomainKind::Torus3;
  double radius = 1.0;  // ball radius; the torus side is always 1

  static Domain torus() { return {DomainKind::Torus3, 1.0}; }
  static Domain ball(double R) {
    if (!(R > 0.0)) throw Error(ErrorCode::DomainError, "ball radius must be positive");
    return {DomainKind::Ball, R};
  }

  bool is_torus() const { return kind == DomainKind::Torus3; }
  double volume() const {
    return is_torus() ? 1.0 : 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  }
};

/// Minimal-image displacement x - y on the unit torus: every component in [-1/2, 1/2].
inline Point torus_displacement(const Point& x, const Point& y) {
  Point d = x - y;
  for (int i = 0; i < 3; ++i) d[i] -= std::round(d[i]);
  return d;
}

/// Quotient metric on R^3/Z^3. The componentwise minimal image realises the minimum
/// over the 27 neighbouring integer shifts for points in [0,1)^3.
inline double torus_distance(const Point& x, const Point& y) {
  return torus_displacement(x, y).norm();
}

/// C^2 transition: 1 on [0, inner], 0 on [outer, inf), quintic smoothstep in between.
struct CutoffProfile {
  double inner = 0.0;
  double outer = 0.0;

  double operator()(double r) const {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    const double t = (r - inner) / (outer - inner);
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }
  double derivative(double r) const {
    if (r <= inner || r >= outer) return 0.0;
    const double w = outer - inner;
    const double t = (r - inner) / w;
    return -30.0 * t * t * (1.0 - t) * (1.0 - t) / w;
  }
};

struct SingularPoint {
  Point position = Point::Zero();
  double Z = 0.0;
  double cutoff_radius = 0.0;
  CutoffProfile cutoff;  // inner < outer <= cutoff_radius
};

/// c * cos(2 pi n.x) or c * sin(2 pi n.x).
struct TrigTerm {
  double coeff = 0.0;
  std::array<int, 3> n{0, 0, 0};
  bool sine = false;
};

/// Finite trigonometric polynomial on the torus; the default value is V_smooth = 0.
struct TrigPolynomial {
  double constant = 0.0;
  std::vector<TrigTerm> terms;

  double operator()(const Point& x) const {
    double v = constant;
    for (const auto& t : terms) {
      const double ph = 2.0 * std::numbers::pi * (t.n[0] * x[0] + t.n[1] * x[1] + t.n[2] * x[2]);
      v += t.coeff * (t.sine ? std::sin(ph) : std::cos(ph));
    }
    return v;
  }
  double lower_bound() const {
    double b = constant;
    for (const auto& t : terms) b -= std::abs(t.coeff);
    return b;
  }
  bool is_zero() const {
    return constant == 0.0 &&
           std::all_of(terms.begin(), terms.end(), [](const TrigTerm& t) { return t.coeff == 0.0; });
  }
};

/// Radial well on the ball: core_value for r <= transition_inner, the direction-dependent
/// far value far_value + far_gradient.omega for r >= transition_outer, C^2 in between.
struct RadialProfile {
  double core_value = 0.0;
  double far_value = 0.0;
  Point far_gradient = Point::Zero();
  double transition_inner = 0.0;
  double transition_outer = 0.0;

  double far_limit(const Point& omega) const { return far_value + far_gradient.dot(omega); }

  double operator()(const Point& x) const {
    const double r = x.norm();
    const CutoffProfile step{transition_inner, transition_outer};
    const double s = step(r);
    if (s == 1.0) return core_value;
    const Point omega = r > 0.0 ? Point(x / r) : Point(Point::UnitX());
    return s * core_value + (1.0 - s) * far_limit(omega);
  }
  double lower_bound() const {
    return std::min(core_value, far_value - far_gradient.norm());
  }
};

using SmoothPart = std::variant<TrigPolynomial, RadialProfile>;

inline double eval_smooth(const SmoothPart& s, const Point& x) {
  return std::visit([&](const auto& f) { return f(x); }, s);
}

inline double smooth_lower_bound(const SmoothPart& s) {
  return std::visit([](const auto& f) { return f.lower_bound(); }, s);
}

inline bool smooth_is_zero(const SmoothPart& s) {
  const auto* t = std::get_if<TrigPolynomial>(&s);
  return t != nullptr && t->is_zero();
}

/// V = sum_p Z(p) chi_p / |x-p|^2 + V_smooth, with validated geometry.
class PotentialSpec {
 public:
  PotentialSpec() = default;

  PotentialSpec(Domain domain, std::vector<SingularPoint> points, SmoothPart smooth = TrigPolynomial{})
      : domain_(domain), points_(std::move(points)), smooth_(std::move(smooth)) {
    validate();
  }

  const Domain& domain() const { return domain_; }
  const std::vector<SingularPoint>& singular() const { return points_; }
  const SmoothPart& smooth_part() const { return smooth_; }

  bool assumption2_satisfied() const {
    return std::all_of(points_.begin(), points_.end(), [](const SingularPoint& p) { return p.Z > -0.25; });
  }

  double min_Z() const {
    double z = std::numeric_limits<double>::infinity();
    for (const auto& p : points_) z = std::min(z, p.Z);
    return z;
  }

  Point displacement(const Point& x, const Point& y) const {
    return domain_.is_torus() ? torus_displacement(x, y) : Point(x - y);
  }
  double distance(const Point& x, const Point& y) const { return displacement(x, y).norm(); }

  /// Index of the nearest singular point and its distance; nullopt without singular points.
  std::optional<std::pair<std::size_t, double>> nearest(const Point& x) const {
    std::optional<std::pair<std::size_t, double>> best;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d = distance(x, points_[i].position);
      if (!best || d < best->second) best = {i, d};
    }
    return best;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (!(p.cutoff.inner > 0.0) || !(p.cutoff.outer > p.cutoff.inner))
        throw Error(ErrorCode::DomainError, "cutoff profile needs 0 < inner < outer");
      if (p.cutoff.outer > p.cutoff_radius * (1.0 + 1e-12))
        throw Error(ErrorCode::DomainError, "cutoff outer radius exceeds cutoff_radius");
      if (domain_.is_torus()) {
        for (int c = 0; c < 3; ++c)
          if (p.position[c] < 0.0 || p.position[c] >= 1.0)
            throw Error(ErrorCode::DomainError, "torus singular point outside [0,1)^3");
        if (p.cutoff_radius >= 0.5)
          throw Error(ErrorCode::DomainError, "torus cutoff_radius must be < 1/2");
      } else if (p.position.norm() >= domain_.radius) {
        throw Error(ErrorCode::DomainError, "ball singular point outside the ball");
      }
      for (std::size_t j = 0; j < i; ++j) {
        const double d = distance(p.position, points_[j].position);
        if (p.cutoff_radius >= 0.5 * d || points_[j].cutoff_radius >= 0.5 * d)
          throw Error(ErrorCode::DomainError,
                      "cutoff radii must be below half the distance between singular points");
      }
    }
  }

  Domain domain_{};
  std::vector<SingularPoint> points_;
  SmoothPart smooth_{TrigPolynomial{}};
};

/// Regularised distance to the singular set: |x-p| where chi_p = 1, exactly 1 outside
/// every cutoff support, chi-weighted blend in the transition.
inline double rho(const Point& x, const PotentialSpec& spec) {
  const auto near = spec.nearest(x);
  if (!near) return 1.0;
  const auto& p = spec.singular()[near->first];
  const double chi = p.cutoff(near->second);
  return chi * near->second + (1.0 - chi);
}

/// V(x). Throws DomainError exactly at a singular point.
inline double eval_potential(const Point& x, const PotentialSpec& spec) {
  double v = eval_smooth(spec.smooth_part(), x);
  for (const auto& p : spec.singular()) {
    const double d = spec.distance(x, p.position);
    if (d == 0.0) throw Error(ErrorCode::DomainError, "potential evaluated at a singular point");
    if (p.Z != 0.0) v += p.Z * p.cutoff(d) / (d * d);
  }
  return v;
}

/// Only the singular part sum_p Z chi_p / |x-p|^2.
inline double eval_singular_potential(const Point& x, const PotentialSpec& spec) {
  double v = 0.0;
  for (const auto& p : spec.singular()) {
    const double d = spec.distance(x, p.position);
    if (d == 0.0) throw Error(ErrorCode::DomainError, "potential evaluated at a singular point");
    if (p.Z != 0.0) v += p.Z * p.cutoff(d) / (d * d);
  }
  return v;
}

}  // namespace isq
