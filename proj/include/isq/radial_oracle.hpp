#pragma once

// Exact separated model problem
//   -u'' - (2/r) u' + (Z + l(l+1)) / r^2 u = lambda u  on (0, R),  u(R) = 0,
// with the Friedrichs branch u ~ r^{nu - 1/2} at the origin, nu = sqrt((l+1/2)^2 + Z).
// Eigenpairs are (j_{nu,k}/R)^2 and r^{-1/2} J_nu(sqrt(lambda) r).
//
// Also hosts the finite-difference radial solver used as the independent second oracle.

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "isq/error.hpp"

namespace isq {

enum class BesselMethod { Auto, PowerSeries, ODEIntegration };

namespace detail {

inline void check_bessel_range(double nu, double x) {
  if (!(nu >= 0.0 && nu <= 60.0) || !(x >= 0.0 && x <= 200.0))
    throw Error(ErrorCode::OutOfRange, "bessel_j needs 0 <= nu <= 60 and 0 <= x <= 200");
}

/// J_nu(x) and J_nu'(x) from the ascending series, summed in extended precision.
inline std::array<double, 2> bessel_series(double nu, double x) {
  if (x == 0.0) return {nu == 0.0 ? 1.0 : 0.0, nu == 1.0 ? 0.5 : 0.0};
  using real = long double;
  const real h = static_cast<real>(x) / 2;
  const real q = -h * h;
  real term = std::pow(h, static_cast<real>(nu)) / std::tgamma(static_cast<real>(nu) + 1);
  real sum = 0, dsum = 0;
  for (int m = 0; m < 400; ++m) {
    sum += term;
    dsum += term * (nu + 2 * m);
    if (std::abs(term) <= 1e-22L * std::abs(sum) && m > h) break;
    term *= q / ((m + 1) * (static_cast<real>(nu) + m + 1));
  }
  return {static_cast<double>(sum), static_cast<double>(dsum / x)};
}

/// log10 of the largest term magnitude in the ascending series; bounds the cancellation error.
inline double series_peak_log10(double nu, double x) {
  if (x == 0.0) return -300.0;
  double peak = -300.0;
  for (int m = 0; m < 400; ++m) {
    const double lt = (nu + 2 * m) * std::log(x / 2) - std::lgamma(m + 1.0) - std::lgamma(nu + m + 1.0);
    peak = std::max(peak, lt / std::log(10.0));
    if (m > x) break;
  }
  return peak;
}

/// Series region: x <= max(12, 2 nu), shrunk so the peak term stays below 1e4 (long double
/// cancellation then costs at most ~1e-15 absolute).
inline double series_limit(double nu) {
  double x = std::max(12.0, 2.0 * nu);
  while (x > 1.0 && series_peak_log10(nu, x) > 4.0) x -= 0.25;
  return x;
}

using OdeState = std::array<double, 2>;

/// Advances (J, J') of the Bessel equation y'' + y'/x + (1 - nu^2/x^2) y = 0 from x0 to x1.
inline OdeState bessel_advance(double nu, OdeState s, double x0, double x1, double tol) {
  namespace odeint = boost::numeric::odeint;
  if (x1 == x0) return s;
  auto rhs = [nu](const OdeState& y, OdeState& dy, double x) {
    dy[0] = y[1];
    dy[1] = -y[1] / x - (1.0 - nu * nu / (x * x)) * y[0];
  };
  auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<OdeState>>(tol, tol);
  odeint::integrate_adaptive(stepper, rhs, s, x0, x1, (x1 - x0) / 16.0);
  return s;
}

}  // namespace detail

/// J_nu(x) for 0 <= nu <= 60, 0 <= x <= 200. Auto uses the series up to detail::series_limit(nu)
/// and integrates the Bessel equation from there.
inline double bessel_j(double nu, double x, double tol = 1e-13, BesselMethod method = BesselMethod::Auto) {
  detail::check_bessel_range(nu, x);
  const double x0 = detail::series_limit(nu);
  if (method == BesselMethod::PowerSeries || (method == BesselMethod::Auto && x <= x0))
    return detail::bessel_series(nu, x)[0];
  // ODE path: start at the series limit, or below x when x lies inside the series region
  // (explicit ODEIntegration requests are cross-checked there).
  const double start = std::min(x0, std::max(1.0, 0.5 * x));
  const auto s0 = detail::bessel_series(nu, start);
  return detail::bessel_advance(nu, {s0[0], s0[1]}, start, x, tol * 1e-2)[0];
}

/// k-th positive zero of J_nu: sign-change scan from the origin on a grid finer than the
/// zero spacing, bounded by the McMahon estimate (k + nu/2 - 1/4) pi plus four half-periods
/// of slack, then bisection to full precision.
inline double bessel_zero(double nu, int k) {
  if (k < 1) throw Error(ErrorCode::OutOfRange, "bessel_zero needs k >= 1");
  if (!(nu >= 0.0 && nu <= 60.0)) throw Error(ErrorCode::OutOfRange, "bessel_zero needs 0 <= nu <= 60");
  const double x_series = detail::series_limit(nu);
  const double step = 0.25;
  const double x_end = std::min(200.0, (k + nu / 2.0 - 0.25) * std::numbers::pi + 4.0 * std::numbers::pi);

  // Value and derivative along the scan; the ODE state is carried forward beyond the series region.
  auto eval_from = [&](double xa, const detail::OdeState& sa, double xb) -> detail::OdeState {
    if (xb <= x_series) {
      const auto s = detail::bessel_series(nu, xb);
      return {s[0], s[1]};
    }
    if (xa < x_series) {
      const auto s = detail::bessel_series(nu, x_series);
      return detail::bessel_advance(nu, {s[0], s[1]}, x_series, xb, 1e-15);
    }
    return detail::bessel_advance(nu, sa, xa, xb, 1e-15);
  };

  int found = 0;
  double xa = step;
  detail::OdeState sa = eval_from(0.0, {}, xa);
  while (xa < x_end) {
    const double xb = xa + step;
    const detail::OdeState sb = eval_from(xa, sa, xb);
    if (sa[0] == 0.0 || (sa[0] < 0.0) != (sb[0] < 0.0)) {
      if (++found == k) {
        double lo = xa, hi = xb;
        detail::OdeState slo = sa;
        for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          const detail::OdeState sm = eval_from(lo, slo, mid);
          if ((sm[0] < 0.0) == (slo[0] < 0.0) && sm[0] != 0.0) {
            lo = mid;
            slo = sm;
          } else {
            hi = mid;
          }
        }
        return 0.5 * (lo + hi);
      }
    }
    xa = xb;
    sa = sb;
  }
  throw Error(ErrorCode::BracketingFailure,
              "zero " + std::to_string(k) + " of J_" + std::to_string(nu) + " not bracketed in [0, " +
                  std::to_string(x_end) + "]");
}

/// Radial mode (l, k) of the Friedrichs model problem on the ball of radius R.
struct RadialMode {
  int l = 0;
  int k = 1;
  double Z = 0.0;
  double R = 1.0;
  double nu = 0.5;
  double lambda = 0.0;
  double normalization = 1.0;  // c in u = c r^{-1/2} J_nu(sqrt(lambda) r)
};

inline double radial_order(double Z, int l) { return std::sqrt((l + 0.5) * (l + 0.5) + Z); }

inline double model_eigenvalue(double Z, int l, int k, double R) {
  if (!(Z > -0.25))
    throw Error(ErrorCode::OscillatoryRegime, "oscillatory regime Z <= -1/4: no Friedrichs ground state selection implemented");
  if (l < 0 || !(R > 0.0)) throw Error(ErrorCode::OutOfRange, "model_eigenvalue needs l >= 0, R > 0");
  const double j = bessel_zero(radial_order(Z, l), k);
  return (j / R) * (j / R);
}

inline RadialMode make_mode(double Z, int l, int k, double R) {
  RadialMode m;
  m.l = l;
  m.k = k;
  m.Z = Z;
  m.R = R;
  m.lambda = model_eigenvalue(Z, l, k, R);
  m.nu = radial_order(Z, l);
  const double j = std::sqrt(m.lambda) * R;
  // int_0^R J_nu(j r/R)^2 r dr = R^2/2 J_{nu+1}(j)^2
  m.normalization = std::sqrt(2.0) / (R * std::abs(bessel_j(m.nu + 1.0, j)));
  return m;
}

/// u(r) = c r^{-1/2} J_nu(sqrt(lambda) r), normalised in L^2((0,R), r^2 dr).
inline double model_eigenfunction(const RadialMode& mode, double r) {
  if (!(r > 0.0) || r > mode.R * (1.0 + 1e-14)) throw Error(ErrorCode::OutOfRange, "model_eigenfunction needs 0 < r <= R");
  return mode.normalization * bessel_j(mode.nu, std::sqrt(mode.lambda) * std::min(r, mode.R)) / std::sqrt(r);
}

struct RadialFdResult {
  double lambda = 0.0;
  std::vector<double> r;  // interior nodes
  std::vector<double> u;  // u = v / r, normalised in L^2(r^2 dr), positive near 0
};

/// Three-point scheme for -v'' + (c/r^2 + W(r)) v = lambda v, v = r u, on the graded grid
/// r_j = R (j/n)^{1/mu}. The flux through the first half-cell uses v ~ r^{beta+1}.
/// Returns the k-th eigenvalue and, if requested, its eigenvector.
inline RadialFdResult fd_radial_solve(double c, double beta, const std::function<double(double)>& W, int k,
                                      double R, int n, double mu, bool with_vector) {
  if (n < 16) throw Error(ErrorCode::OutOfRange, "fd_radial needs n >= 16");
  if (!(mu > 0.0 && mu <= 1.0)) throw Error(ErrorCode::OutOfRange, "fd_radial needs 0 < mu <= 1");
  if (k < 1 || k > n - 1) throw Error(ErrorCode::OutOfRange, "fd_radial eigen index out of range");
  std::vector<double> r(n + 1);
  for (int j = 0; j <= n; ++j) r[j] = R * std::pow(double(j) / n, 1.0 / mu);
  r[n] = R;
  const int m = n - 1;  // unknowns j = 1..n-1
  Eigen::VectorXd kd(m), ko(std::max(m - 1, 0)), dual(m);
  for (int j = 1; j <= m; ++j) {
    const double hl = r[j] - r[j - 1], hr = r[j + 1] - r[j];
    dual[j - 1] = 0.5 * (hl + hr);
    double diag = 1.0 / hr + (c / (r[j] * r[j]) + (W ? W(r[j]) : 0.0)) * dual[j - 1];
    if (j == 1) {
      const double rh = 0.5 * (r[0] + r[1]);
      diag += (beta + 1.0) * std::pow(rh / r[1], beta) / r[1];
    } else {
      diag += 1.0 / hl;
    }
    kd[j - 1] = diag;
    if (j < m) ko[j - 1] = -1.0 / hr;
  }
  // Symmetric scaling D^{-1/2} K D^{-1/2}.
  Eigen::VectorXd d(m), e(std::max(m - 1, 0));
  for (int i = 0; i < m; ++i) d[i] = kd[i] / dual[i];
  for (int i = 0; i + 1 < m; ++i) e[i] = ko[i] / std::sqrt(dual[i] * dual[i + 1]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  RadialFdResult out;
  out.lambda = es.eigenvalues()[k - 1];
  if (!with_vector) return out;

  // Inverse iteration on the tridiagonal (T - sigma) y = x.
  const double gap = k < m ? es.eigenvalues()[k] - out.lambda : 1.0;
  const double gap_lo = k > 1 ? out.lambda - es.eigenvalues()[k - 2] : gap;
  const double sigma = out.lambda - 1e-6 * std::min(gap, gap_lo);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
  for (int it = 0; it < 4; ++it) {
    Eigen::VectorXd cp(m), dp(m);
    // Thomas algorithm.
    double denom = d[0] - sigma;
    cp[0] = m > 1 ? e[0] / denom : 0.0;
    dp[0] = y[0] / denom;
    for (int i = 1; i < m; ++i) {
      denom = (d[i] - sigma) - e[i - 1] * cp[i - 1];
      cp[i] = i + 1 < m ? e[i] / denom : 0.0;
      dp[i] = (y[i] - e[i - 1] * dp[i - 1]) / denom;
    }
    for (int i = m - 2; i >= 0; --i) dp[i] -= cp[i] * dp[i + 1];
    y = dp / dp.norm();
  }
  // Back to v = D^{-1/2} y, then u = v / r with sum u^2 r^2 dual = 1.
  out.r.assign(r.begin() + 1, r.begin() + n);
  out.u.resize(m);
  double norm2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = y[i] / std::sqrt(dual[i]);
    out.u[i] = v / out.r[i];
    norm2 += v * v * dual[i];
  }
  const double s = (out.u[0] < 0.0 ? -1.0 : 1.0) / std::sqrt(norm2);
  for (auto& v : out.u) v *= s;
  return out;
}

/// k-th eigenvalue of the finite-difference radial model with strength Z and degree l.
inline double fd_radial_eigenvalue(double Z, int l, int k, double R, int n, double mu) {
  if (!(Z > -0.25)) throw Error(ErrorCode::OscillatoryRegime, "fd_radial_eigenvalue needs Z > -1/4");
  const double beta = radial_order(Z, l) - 0.5;
  return fd_radial_solve(Z + l * (l + 1.0), beta, {}, k, R, n, mu, false).lambda;
}

}  // namespace isq
