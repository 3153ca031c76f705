#pragma once

// Boundary spectral data of the model operator tau^2 + tau + Delta_{S^2} - Z at a
// singular point: indicial roots, regularity exponents, extension classification,
// index sets and Fredholm index counts.
//
// Every enumeration over spherical-harmonic degrees takes an explicit cutoff l <= L_max;
// roots with l > L_max are never reported.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isq/error.hpp"
#include "isq/model.hpp"

namespace isq {

using cplx = std::complex<double>;

inline constexpr int kDefaultLmax = 25;

enum class RootKind { BetaPlus, AlphaMinus };

struct IndicialRoot {
  cplx value;
  int l = 0;
  RootKind kind = RootKind::BetaPlus;
  int pole_order_minus_one = 0;
  int multiplicity = 1;  // 2l + 1
};

/// (1+2l)^2 + 4Z, the discriminant of tau^2 + tau - l(l+1) - Z.
inline double indicial_discriminant(double Z, int l) {
  const double s = 1.0 + 2.0 * l;
  return s * s + 4.0 * Z;
}

/// sqrt of the discriminant, taking the positive imaginary root when it is negative.
inline cplx indicial_sqrt(double Z, int l) {
  const double d = indicial_discriminant(Z, l);
  return d >= 0.0 ? cplx(std::sqrt(d), 0.0) : cplx(0.0, std::sqrt(-d));
}

/// (beta_l, alpha_l) = ((+-sqrt((1+2l)^2 + 4Z) - 1) / 2).
inline std::pair<cplx, cplx> indicial_roots(double Z, int l) {
  if (l < 0) throw Error(ErrorCode::OutOfRange, "spherical degree l must be >= 0");
  const cplx s = indicial_sqrt(Z, l);
  return {(s - 1.0) / 2.0, (-s - 1.0) / 2.0};
}

/// Shifted root beta_l + 1/2 = sqrt((l+1/2)^2 + Z) (positive imaginary branch if negative).
inline cplx shifted_root(double Z, int l) {
  const double q = (l + 0.5) * (l + 0.5) + Z;
  return q >= 0.0 ? cplx(std::sqrt(q), 0.0) : cplx(0.0, std::sqrt(-q));
}

inline bool is_double_root_strength(double Z, int l) { return indicial_discriminant(Z, l) == 0.0; }

/// Smallest l with Z = -(l+1/2)^2, if any.
inline std::optional<int> double_root_degree(double Z) {
  if (Z > -0.25) return std::nullopt;
  const double l = std::sqrt(-Z) - 0.5;
  const auto li = static_cast<int>(std::lround(l));
  if (li >= 0 && is_double_root_strength(Z, li)) return li;
  return std::nullopt;
}

/// Regularity exponent nu_0(Z): 2 for Z >= 3/4, 1 + sqrt(1/4 + Z) in between, 1 for Z <= -1/4.
inline double nu0(double Z) {
  if (Z >= 0.75) return 2.0;
  if (Z > -0.25) return 1.0 + std::sqrt(0.25 + Z);
  return 1.0;
}

struct BSpectrum {
  double Z = 0.0;
  int L_max = 0;
  std::vector<IndicialRoot> roots;
  std::optional<double> eta;  // nullopt marks the complex regime Z < -1/4
  double nu0 = 1.0;
  bool has_double_root = false;
  std::optional<int> double_root_l;
};

inline BSpectrum boundary_spectrum(double Z, int L_max = kDefaultLmax) {
  if (L_max < 0) throw Error(ErrorCode::OutOfRange, "L_max must be >= 0");
  BSpectrum b;
  b.Z = Z;
  b.L_max = L_max;
  b.nu0 = nu0(Z);
  if (Z >= -0.25) b.eta = std::sqrt(0.25 + Z);
  for (int l = 0; l <= L_max; ++l) {
    const auto [beta, alpha] = indicial_roots(Z, l);
    const bool dbl = is_double_root_strength(Z, l);
    b.roots.push_back({beta, l, RootKind::BetaPlus, 0, 2 * l + 1});
    // Spec_b contains (-1/2, 0) and (-1/2, 1) at a double root.
    b.roots.push_back({alpha, l, RootKind::AlphaMinus, dbl ? 1 : 0, 2 * l + 1});
    if (dbl && !b.has_double_root) {
      b.has_double_root = true;
      b.double_root_l = l;
    }
  }
  return b;
}

/// eta = sqrt(1/4 + min_p Z(p)); +inf without singular points.
inline double eta(const PotentialSpec& spec) {
  if (!spec.assumption2_satisfied())
    throw Error(ErrorCode::AssumptionViolation, "eta requires min Z(p) > -1/4");
  if (spec.singular().empty()) return std::numeric_limits<double>::infinity();
  return std::sqrt(0.25 + spec.min_Z());
}

enum class ExtensionRegime {
  EssentiallySelfAdjointStrict,
  EssentiallySelfAdjointBoundary,
  FriedrichsWithOneSingularFunction,
  DoubleRootLog,
  ImaginaryRootRegime,
};

inline const char* to_string(ExtensionRegime r) {
  switch (r) {
    case ExtensionRegime::EssentiallySelfAdjointStrict: return "EssentiallySelfAdjointStrict";
    case ExtensionRegime::EssentiallySelfAdjointBoundary: return "EssentiallySelfAdjointBoundary";
    case ExtensionRegime::FriedrichsWithOneSingularFunction: return "FriedrichsWithOneSingularFunction";
    case ExtensionRegime::DoubleRootLog: return "DoubleRootLog";
    case ExtensionRegime::ImaginaryRootRegime: return "ImaginaryRootRegime";
  }
  return "?";
}

enum class LocalForm {
  Power,     // w rho^{exponent} psi_l^m
  Constant,  // w rho^{-1/2} psi_l^m (zero shifted root)
  LogCos,    // w rho^{-1/2} cos(a log rho) psi_l^m
};

/// Symbolic local function near p, already multiplied back by rho^{-1/2}.
struct LocalFunction {
  LocalForm form = LocalForm::Power;
  int l = 0;
  double exponent = 0.0;
  double frequency = 0.0;  // a, LogCos only

  std::string describe() const {
    char buf[160];
    switch (form) {
      case LocalForm::Power:
        std::snprintf(buf, sizeof buf, "w*rho^(%.12g)*psi_%d^m", exponent, l);
        break;
      case LocalForm::Constant:
        std::snprintf(buf, sizeof buf, "w*rho^(-0.5)*psi_%d^m", l);
        break;
      case LocalForm::LogCos:
        std::snprintf(buf, sizeof buf, "w*rho^(-0.5)*cos(%.12g*log(rho))*psi_%d^m", frequency, l);
        break;
    }
    return buf;
  }
};

struct ExtensionClassification {
  double Z = 0.0;
  ExtensionRegime regime = ExtensionRegime::EssentiallySelfAdjointStrict;
  std::string domain_description;
  std::vector<LocalFunction> extension_basis;
};

/// Self-adjoint extension selected at a point of strength Z. The basis collects, for every
/// degree l whose shifted root has |Re| < 1, the Friedrichs-type choice: w rho^{beta~} for
/// real roots, w for a zero root, w cos(a log rho) for beta~ = ia; each times rho^{-1/2}.
inline ExtensionClassification classify_extension(double Z) {
  ExtensionClassification c;
  c.Z = Z;
  if (Z > 0.75) {
    c.regime = ExtensionRegime::EssentiallySelfAdjointStrict;
    c.domain_description = "K^2_2";
  } else if (Z == 0.75) {
    c.regime = ExtensionRegime::EssentiallySelfAdjointBoundary;
    c.domain_description = "closure of C_c^inf: K^2_2 + C*chi*rho^(1/2)";
  } else if (Z > -0.25) {
    c.regime = ExtensionRegime::FriedrichsWithOneSingularFunction;
    c.domain_description = "K^2_2 + C*chi*rho^(sqrt(1/4+Z)-1/2)";
  } else if (Z == -0.25) {
    c.regime = ExtensionRegime::DoubleRootLog;
    c.domain_description = "D(A_min) + span{w*rho^(-1/2)}";
  } else {
    c.regime = ExtensionRegime::ImaginaryRootRegime;
    c.domain_description = "D(A_min) + span{w*rho^(-1/2)*cos(a_l log rho)*psi_l^m, ...}";
  }
  // beta~_l >= l for Z >= -1/4 and |Im| grows with -Z, so l <= sqrt(max(0,-Z)) + 1 suffices.
  const int lmax = 1 + static_cast<int>(std::ceil(std::sqrt(std::max(0.0, -Z))));
  for (int l = 0; l <= lmax; ++l) {
    const cplx b = shifted_root(Z, l);
    if (b.imag() != 0.0) {
      c.extension_basis.push_back({LocalForm::LogCos, l, -0.5, b.imag()});
    } else if (b.real() == 0.0) {
      c.extension_basis.push_back({LocalForm::Constant, l, -0.5, 0.0});
    } else if (b.real() < 1.0) {
      c.extension_basis.push_back({LocalForm::Power, l, b.real() - 0.5, 0.0});
    }
  }
  return c;
}

struct IndexEntry {
  cplx gamma;
  int l = 0;
  int n = 0;
  RootKind kind = RootKind::BetaPlus;
};

struct IndexSet {
  double Z = 0.0;
  double re_cut = 0.0;
  int L_max = 0;
  std::vector<IndexEntry> exponents;  // sorted by real part, then imaginary part, l, n
};

/// {beta_l + n, alpha_l + n : 0 <= l <= L_max, n >= 0} truncated to Re <= re_cut.
inline IndexSet index_set(double Z, double re_cut, int L_max = kDefaultLmax) {
  if (const auto dl = double_root_degree(Z); dl && *dl <= L_max)
    throw Error(ErrorCode::LogTerms, "double indicial root: expansion carries log terms");
  IndexSet s{Z, re_cut, L_max, {}};
  for (int l = 0; l <= L_max; ++l) {
    const auto [beta, alpha] = indicial_roots(Z, l);
    for (const auto& [root, kind] : {std::pair{beta, RootKind::BetaPlus}, std::pair{alpha, RootKind::AlphaMinus}}) {
      for (int n = 0; root.real() + n <= re_cut; ++n) s.exponents.push_back({root + double(n), l, n, kind});
    }
  }
  std::sort(s.exponents.begin(), s.exponents.end(), [](const IndexEntry& a, const IndexEntry& b) {
    if (a.gamma.real() != b.gamma.real()) return a.gamma.real() < b.gamma.real();
    if (a.gamma.imag() != b.gamma.imag()) return a.gamma.imag() < b.gamma.imag();
    if (a.l != b.l) return a.l < b.l;
    return a.n < b.n;
  });
  return s;
}

/// Index of H_k - lambda : K^{m+1}_{a+1} -> K^{m-1}_{a-1}: -N for a > 0, +N for a < 0, where N
/// counts shifted roots strictly between 0 and a with multiplicity 2l+1.
inline int fredholm_index(double Z, double a, std::optional<int> L_max = std::nullopt) {
  if (!(Z > -0.25))
    throw Error(ErrorCode::NotCovered, "Fredholm count is only covered for real shifted roots (Z > -1/4)");
  const int lmax = L_max.value_or(static_cast<int>(std::ceil(std::abs(a))) + 1);
  int count = 0;
  for (int l = 0; l <= lmax; ++l) {
    const double b = shifted_root(Z, l).real();
    if (std::abs(a) == b) throw Error(ErrorCode::WeightOnIndicialLine, "weight a lies on a shifted indicial root");
    if (b < std::abs(a)) count += 2 * l + 1;
  }
  if (a > 0.0) return -count;
  if (a < 0.0) return count;
  return 0;
}

struct SingularGenerator {
  std::size_t point = 0;
  double exponent = 0.0;  // chi_p rho^{exponent}
};

/// Generators chi_p rho^{sqrt(1/4+Z(p)) - 1/2} of W_s for the points with Z(p) in (-1/4, 3/4].
inline std::vector<SingularGenerator> singular_space_Ws(const PotentialSpec& spec) {
  if (!spec.assumption2_satisfied())
    throw Error(ErrorCode::AssumptionViolation, "W_s requires min Z(p) > -1/4");
  std::vector<SingularGenerator> g;
  for (std::size_t i = 0; i < spec.singular().size(); ++i) {
    const double Z = spec.singular()[i].Z;
    if (Z > -0.25 && Z <= 0.75) g.push_back({i, std::sqrt(0.25 + Z) - 0.5});
  }
  return g;
}

}  // namespace isq
