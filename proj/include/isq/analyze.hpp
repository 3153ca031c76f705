#pragma once

// Post-processing of eigenpairs: singular exponents, weighted-norm profiles, convergence
// rates, exponential decay and the bottom of the essential spectrum.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "isq/error.hpp"
#include "isq/fit.hpp"
#include "isq/mesh.hpp"
#include "isq/model.hpp"
#include "isq/radial_oracle.hpp"

namespace isq {

/// The 26 unit directions (i,j,k)/|(i,j,k)|, i,j,k in {-1,0,1}, not all zero. On the
/// structured meshes these are mesh edges through every singular vertex.
inline const std::vector<Point>& probe_directions() {
  static const std::vector<Point> dirs = [] {
    std::vector<Point> d;
    for (int k = -1; k <= 1; ++k)
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i)
          if (i || j || k) d.push_back(Point(i, j, k).normalized());
    return d;
  }();
  return dirs;
}

struct ExponentFit {
  std::size_t point = 0;
  double r_lo = 0.0, r_hi = 0.0;
  std::vector<double> radii;
  std::vector<double> averages;   // mean |u| over the probe directions
  double slope = std::nan("");
  double intercept = std::nan("");
  double r2 = 0.0;
  double angular_variation = std::nan("");
  bool vanished = false;          // all samples below 1e-13 max|u|
};

/// Explicit fit window; unset ends fall back to the defaults described at
/// fit_singular_exponent.
struct FitWindow {
  std::optional<double> r_lo;
  std::optional<double> r_hi;
};

namespace detail {

inline std::size_t mesh_point_index(const GradedMesh& m, const SingularPoint& p) {
  for (std::size_t s = 0; s < m.singular_vertex.size(); ++s) {
    const Point& v = m.vertices[m.singular_vertex[s]];
    const Point d = m.domain.is_torus() ? torus_displacement(v, p.position) : Point(v - p.position);
    if (d.norm() < 1e-12) return s;
  }
  throw Error(ErrorCode::OutOfRange, "singular point is not a singular vertex of the mesh");
}

/// Radii in [lo, hi] taken from the layer radii, refined geometrically to at least 6.
inline std::vector<double> window_radii(const std::vector<double>& layers, double lo, double hi) {
  std::vector<double> r;
  for (double x : layers)
    if (x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12)) r.push_back(x);
  if (r.size() < 2) r = {lo, hi};
  while (r.size() < 6) {
    std::vector<double> s;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      s.push_back(r[i]);
      s.push_back(std::sqrt(r[i] * r[i + 1]));
    }
    s.push_back(r.back());
    r = s;
  }
  return r;
}

}  // namespace detail

/// Fits log of the probe average of |u| against log r from a list of radii and samples
/// (samples[i][d] = u at radius i, direction d). Shared by the mesh and oracle paths.
inline ExponentFit fit_exponent_samples(const std::vector<double>& radii,
                                        const std::vector<std::vector<cplx>>& samples, double scale) {
  ExponentFit f;
  f.radii = radii;
  f.r_lo = radii.front();
  f.r_hi = radii.back();
  double amax = 0.0;
  cplx total = 0.0;
  for (const auto& row : samples)
    for (const auto& v : row) {
      amax = std::max(amax, std::abs(v));
      total += v;
    }
  if (amax < 1e-13 * scale) {
    f.vanished = true;
    return f;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    double s = 0.0;
    for (const auto& v : samples[i]) s += std::abs(v);
    s /= double(samples[i].size());
    f.averages.push_back(s);
    lx.push_back(std::log(radii[i]));
    ly.push_back(std::log(s));
  }
  const LineFit lf = fit_line(lx, ly);
  f.slope = lf.slope;
  f.intercept = lf.intercept;
  f.r2 = lf.r2;
  // Leading coefficient per direction: phase-aligned mean of u / r^slope over the window.
  const cplx phase = std::abs(total) > 1e-12 * amax ? std::conj(total) / std::abs(total) : cplx(1.0);
  const std::size_t nd = samples.front().size();
  std::vector<double> g(nd, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t i = 0; i < radii.size(); ++i) g[d] += (phase * samples[i][d]).real() / std::pow(radii[i], f.slope);
    g[d] /= double(radii.size());
  }
  double gm = 0.0;
  for (double x : g) gm += x;
  gm /= double(nd);
  double var = 0.0;
  for (double x : g) var = std::max(var, std::abs(x - gm));
  f.angular_variation = std::abs(gm) > 0.0 ? var / std::abs(gm) : std::numeric_limits<double>::infinity();
  return f;
}

/// Least-squares exponent of u near p. Default window: from the second layer radius to
/// min(cutoff inner radius, 2/3 cutoff_radius); radii are the layer radii inside the window
/// (refined geometrically to at least 6), probed along the 26 lattice directions.
inline ExponentFit fit_singular_exponent(const DiscreteFunction& u, const SingularPoint& p, const FitWindow& w = {}) {
  const GradedMesh& m = *u.mesh;
  const std::size_t s = detail::mesh_point_index(m, p);
  const auto& layers = m.layer_radii[s];
  const double lo_default = layers.size() >= 2 ? layers[1] : m.spacing;
  const double lo = std::max(w.r_lo.value_or(lo_default), lo_default);
  const double hi = std::min(w.r_hi.value_or(std::min(p.cutoff.inner, 2.0 / 3.0 * p.cutoff_radius)), p.cutoff.inner);
  if (!(hi > lo)) throw Error(ErrorCode::OutOfRange, "empty exponent fit window");
  const auto radii = detail::window_radii(layers, lo, hi);
  const Point centre = m.vertices[m.singular_vertex[s]];
  std::vector<std::vector<cplx>> samples;
  for (double r : radii) {
    std::vector<cplx> row;
    for (const auto& e : probe_directions()) row.push_back(evaluate(u, centre + r * e));
    samples.push_back(row);
  }
  double scale = 0.0;
  for (const auto& v : u.values) scale = std::max(scale, std::abs(v));
  ExponentFit f = fit_exponent_samples(radii, samples, scale);
  f.point = s;
  return f;
}

/// Leading coefficient c in u ~ c rho^gamma near p for a prescribed gamma, fitted on the
/// probe average over the window.
inline double leading_coefficient(const DiscreteFunction& u, const SingularPoint& p, double gamma,
                                  const FitWindow& w = {}) {
  const ExponentFit f = fit_singular_exponent(u, p, w);
  if (f.vanished) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.radii.size(); ++i) {
    const double b = std::pow(f.radii[i], gamma);
    num += b * f.averages[i];
    den += b * b;
  }
  return num / den;
}

/// u - c chi_p rho^gamma, nodal; the singular vertex takes the limit value when gamma > 0
/// and 0 otherwise.
inline DiscreteFunction subtract_leading_term(const DiscreteFunction& u, const SingularPoint& p, double gamma,
                                              double c, const PotentialSpec& spec) {
  DiscreteFunction r = u;
  for (std::size_t v = 0; v < u.values.size(); ++v) {
    const double d = spec.distance(u.mesh->vertices[v], p.position);
    if (d == 0.0) {
      if (gamma <= 0.0) r.values[v] = 0.0;
      continue;
    }
    r.values[v] -= c * p.cutoff(d) * std::pow(d, gamma);
  }
  return r;
}

enum class Verdict { Bounded, Growing };
inline const char* to_string(Verdict v) { return v == Verdict::Bounded ? "bounded" : "growing"; }

struct ProfileRow {
  double a = 0.0;
  std::vector<double> norms;  // K^1_{a+1} norm on each mesh, coarse to fine
  double increment_ratio = 0.0;
  Verdict verdict = Verdict::Bounded;
};

struct RegularityProfile {
  std::vector<double> n;  // mesh subdivision counts
  std::vector<ProfileRow> rows;
  std::optional<std::pair<double, double>> transition;  // [last bounded a, first growing a]
};

/// Norm trend of a refinement family. Increments are measured per unit log n; the family is
/// "growing" at a when the last increment is positive and not smaller than the one before,
/// "bounded" otherwise (including negligible increments, below 1e-6 of the norm).
inline RegularityProfile weighted_regularity_profile(const std::vector<DiscreteFunction>& family,
                                                     const PotentialSpec& spec, const std::vector<double>& a_grid) {
  if (family.size() < 3) throw Error(ErrorCode::OutOfRange, "regularity profile needs >= 3 meshes");
  RegularityProfile prof;
  for (const auto& u : family) prof.n.push_back(u.mesh->n);
  std::vector<double> grid = a_grid;
  std::sort(grid.begin(), grid.end());
  for (double a : grid) {
    ProfileRow row;
    row.a = a;
    for (const auto& u : family) row.norms.push_back(weighted_norm(u, 1, a + 1.0, spec));
    const std::size_t k = row.norms.size();
    const double d1 = (row.norms[k - 2] - row.norms[k - 3]) / std::log(prof.n[k - 2] / prof.n[k - 3]);
    const double d2 = (row.norms[k - 1] - row.norms[k - 2]) / std::log(prof.n[k - 1] / prof.n[k - 2]);
    row.increment_ratio = d1 != 0.0 ? d2 / d1 : 0.0;
    const bool negligible = std::abs(row.norms[k - 1] - row.norms[k - 2]) < 1e-6 * std::abs(row.norms[k - 1]);
    const bool growing = !negligible && d2 > 0.0 && d2 >= d1;
    row.verdict = growing ? Verdict::Growing : Verdict::Bounded;
    if (!prof.transition && row.verdict == Verdict::Growing && !prof.rows.empty() &&
        prof.rows.back().verdict == Verdict::Bounded)
      prof.transition = std::make_pair(prof.rows.back().a, a);
    prof.rows.push_back(row);
  }
  return prof;
}

enum class Regime { Uniform, Graded };
inline const char* to_string(Regime r) { return r == Regime::Uniform ? "uniform" : "graded"; }

struct RateSample {
  double h_max = 0.0;
  long dofs = 0;
  double value = 0.0;  // eigenvalue or norm error
  double error = 0.0;  // value - reference (filled by convergence_study)
};

struct RateReport {
  Regime regime = Regime::Uniform;
  std::vector<RateSample> samples;
  std::string reference_kind;  // "oracle", "richardson" or "direct"
  double reference = 0.0;
  double slope = 0.0;  // of log|error| against log h_max
  double intercept = 0.0;
  double r2 = 0.0;
  bool preasymptotic = false;
};

/// Richardson limit of the three finest values with the order measured from them.
inline std::pair<double, double> richardson(const std::vector<RateSample>& s) {
  if (s.size() < 3) throw Error(ErrorCode::OutOfRange, "Richardson extrapolation needs >= 3 levels");
  const auto& a = s[s.size() - 3];
  const auto& b = s[s.size() - 2];
  const auto& c = s[s.size() - 1];
  const double q = (a.value - b.value) / (b.value - c.value);
  auto g = [&](double p) {
    return (std::pow(a.h_max, p) - std::pow(b.h_max, p)) / (std::pow(b.h_max, p) - std::pow(c.h_max, p)) - q;
  };
  double lo = 0.05, hi = 8.0;
  if (!(g(lo) * g(hi) < 0.0)) throw Error(ErrorCode::BracketingFailure, "no Richardson order in [0.05, 8]");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(lo) * g(mid) <= 0.0 ? hi : lo) = mid;
  }
  const double p = 0.5 * (lo + hi);
  const double hb = std::pow(b.h_max, p), hc = std::pow(c.h_max, p);
  return {c.value - (b.value - c.value) * hc / (hb - hc), p};
}

/// Fits log|value - reference| against log h_max. With no oracle the reference is the
/// Richardson limit (order measured, not assumed); quantity = "error" treats the values as
/// errors already.
inline RateReport convergence_study(std::vector<RateSample> samples, Regime regime,
                                    std::optional<double> oracle, bool values_are_errors = false) {
  if (samples.size() < 3) throw Error(ErrorCode::OutOfRange, "convergence study needs >= 3 refinement levels");
  RateReport rep;
  rep.regime = regime;
  if (values_are_errors) {
    rep.reference_kind = "direct";
  } else if (oracle) {
    rep.reference_kind = "oracle";
    rep.reference = *oracle;
  } else {
    rep.reference_kind = "richardson";
    rep.reference = richardson(samples).first;
  }
  std::vector<double> lx, ly;
  for (auto& s : samples) {
    s.error = values_are_errors ? s.value : s.value - rep.reference;
    lx.push_back(std::log(s.h_max));
    ly.push_back(std::log(std::abs(s.error)));
  }
  const LineFit f = fit_line(lx, ly);
  rep.samples = samples;
  rep.slope = f.slope;
  rep.intercept = f.intercept;
  rep.r2 = f.r2;
  rep.preasymptotic = f.r2 < 0.9;
  return rep;
}

/// inf over directions of the radial limit of V_smooth (directions on a Fibonacci sphere
/// plus the 26 probe directions).
inline double essential_spectrum_bound(const PotentialSpec& spec, int n_directions = 2000) {
  const auto* prof = std::get_if<RadialProfile>(&spec.smooth_part());
  if (!prof) throw Error(ErrorCode::NoRadialLimit, "smooth part declares no radial limit at infinity");
  double b = std::numeric_limits<double>::infinity();
  for (const auto& e : probe_directions()) b = std::min(b, prof->far_limit(e));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n_directions; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n_directions;
    const double rr = std::sqrt(1.0 - z * z);
    const Point e(rr * std::cos(golden * i), rr * std::sin(golden * i), z);
    b = std::min(b, prof->far_limit(e));
  }
  return b;
}

struct DecayFit {
  double epsilon_hat = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  double r2 = 0.0;
  double v_inf = 0.0;
  double linear_bound = 0.0;  // V_inf - lambda
  double sqrt_bound = 0.0;    // sqrt(V_inf - lambda)
  std::vector<double> radii, averages;
};

namespace detail {

inline DecayFit decay_from_profile(const std::vector<double>& radii, const std::vector<double>& avg) {
  DecayFit d;
  std::vector<double> y;
  for (double a : avg) y.push_back(-std::log(a));
  const LineFit f = fit_line(radii, y);
  d.epsilon_hat = f.slope;
  d.r2 = f.r2;
  d.radii = radii;
  d.averages = avg;
  d.r_lo = radii.front();
  d.r_hi = radii.back();
  return d;
}

inline std::vector<double> decay_radii(double R, int count) {
  std::vector<double> r;
  for (int i = 0; i < count; ++i) r.push_back(R * (0.5 + 0.4 * i / (count - 1)));
  return r;
}

}  // namespace detail

/// Slope of -log(mean |u|) against r on [R/2, 0.9 R] for an eigenvector on a ball mesh.
inline DecayFit decay_fit(const DiscreteFunction& u, double lambda, const PotentialSpec& spec, int n_radii = 12) {
  if (u.mesh->domain.is_torus()) throw Error(ErrorCode::DomainError, "decay_fit needs a ball mesh");
  const double vinf = essential_spectrum_bound(spec);
  if (!(lambda < vinf))
    throw Error(ErrorCode::NoDecayPredicted, "lambda >= V_inf: no exponential decay is predicted");
  const double R = u.mesh->domain.radius;
  const auto radii = detail::decay_radii(R, n_radii);
  std::vector<double> avg;
  for (double r : radii) {
    double s = 0.0;
    for (const auto& e : probe_directions()) s += std::abs(evaluate(u, r * e));
    avg.push_back(s / double(probe_directions().size()));
  }
  DecayFit d = detail::decay_from_profile(radii, avg);
  d.v_inf = vinf;
  d.linear_bound = vinf - lambda;
  d.sqrt_bound = std::sqrt(vinf - lambda);
  return d;
}

struct RadialSurrogate {
  double lambda = 0.0;
  DecayFit decay;
};

/// 1D finite-difference ground state of -u'' - (2/r) u' + W(r) u on (0, R) with the radially
/// averaged smooth potential, and the decay fit applied to it on the same radii.
inline RadialSurrogate radial_decay_surrogate(const PotentialSpec& spec, int n = 4000, int n_radii = 12) {
  if (spec.domain().is_torus() || !spec.singular().empty())
    throw Error(ErrorCode::DomainError, "radial surrogate needs a ball without singular points");
  const double R = spec.domain().radius;
  const auto W = [&](double r) {
    double s = 0.0;
    for (const auto& e : probe_directions()) s += eval_smooth(spec.smooth_part(), r * e);
    return s / double(probe_directions().size());
  };
  const RadialFdResult fd = fd_radial_solve(0.0, 0.0, W, 1, R, n, 1.0, true);
  const auto radii = detail::decay_radii(R, n_radii);
  std::vector<double> avg;
  for (double r : radii) {
    const auto it = std::lower_bound(fd.r.begin(), fd.r.end(), r);
    const std::size_t j = std::clamp<std::size_t>(it - fd.r.begin(), 1, fd.r.size() - 1);
    const double t = (r - fd.r[j - 1]) / (fd.r[j] - fd.r[j - 1]);
    avg.push_back(std::abs((1.0 - t) * fd.u[j - 1] + t * fd.u[j]));
  }
  RadialSurrogate s;
  s.lambda = fd.lambda;
  s.decay = detail::decay_from_profile(radii, avg);
  const double vinf = essential_spectrum_bound(spec);
  s.decay.v_inf = vinf;
  s.decay.linear_bound = vinf - fd.lambda;
  s.decay.sqrt_bound = vinf > fd.lambda ? std::sqrt(vinf - fd.lambda) : 0.0;
  return s;
}

/// CSV writers for the reports.
inline void write_rate_csv(const RateReport& r, std::ostream& os) {
  os << "level,h_max,dofs,value,error\n";
  char buf[200];
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%ld,%.17g,%.17g\n", i, s.h_max, s.dofs, s.value, s.error);
    os << buf;
  }
}

inline void write_exponent_csv(const ExponentFit& f, std::ostream& os) {
  os << "radius,mean_abs_u\n";
  char buf[100];
  for (std::size_t i = 0; i < f.radii.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.radii[i], f.averages.empty() ? 0.0 : f.averages[i]);
    os << buf;
  }
}

inline void write_profile_csv(const RegularityProfile& p, std::ostream& os) {
  os << "a,level,n,norm,verdict\n";
  char buf[200];
  for (const auto& row : p.rows)
    for (std::size_t i = 0; i < row.norms.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%g,%.17g,%s\n", row.a, i, p.n[i], row.norms[i], to_string(row.verdict));
      os << buf;
    }
}

}  // namespace isq
