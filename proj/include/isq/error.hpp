#pragma once

#include <stdexcept>
#include <string>

namespace isq {

enum class ErrorCode {
  DomainError,           // evaluation outside the admissible set (e.g. V at p)
  AssumptionViolation,   // min Z(p) <= -1/4
  WeightOnIndicialLine,  // Fredholm weight coincides with a shifted root
  NotCovered,            // outside the regime a formula applies to
  LogTerms,              // double indicial root, expansion carries log terms
  OscillatoryRegime,     // radial problem with Z <= -1/4
  OutOfRange,
  BracketingFailure,
  MeshInversion,
  MeshLayout,
  ShiftNotCertified,
  NotConverged,
  NoRadialLimit,
  NoDecayPredicted,
  Config,
  Io,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DomainError: return "domain-error";
    case ErrorCode::AssumptionViolation: return "assumption-2-violation";
    case ErrorCode::WeightOnIndicialLine: return "weight-on-indicial-line";
    case ErrorCode::NotCovered: return "not-covered";
    case ErrorCode::LogTerms: return "log-terms";
    case ErrorCode::OscillatoryRegime: return "oscillatory-regime";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::BracketingFailure: return "bracketing-failure";
    case ErrorCode::MeshInversion: return "mesh-inversion";
    case ErrorCode::MeshLayout: return "mesh-layout";
    case ErrorCode::ShiftNotCertified: return "shift-not-certified";
    case ErrorCode::NotConverged: return "not-converged";
    case ErrorCode::NoRadialLimit: return "no-radial-limit";
    case ErrorCode::NoDecayPredicted: return "no-decay-predicted";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace isq
