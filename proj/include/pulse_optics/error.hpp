#pragma once

#include <stdexcept>
#include <string>

namespace pulse_optics {

enum class ErrorKind {
  Structural,
  Precondition,
  Contract,
  OutsideHyperbolicRegion,
  BranchTracking,
  NearImaginaryEigenvalue,
  DimensionMismatch,
  Assumption,
  Configuration,
  CflViolation,
  PreShockHorizon,
  NonContraction,
  NewtonFailure,
  ValidityBall,
  InsufficientData,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::OutsideHyperbolicRegion: return "outside-hyperbolic-region";
    case ErrorKind::BranchTracking: return "branch-tracking";
    case ErrorKind::NearImaginaryEigenvalue: return "near-imaginary-eigenvalue";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Assumption: return "assumption";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::CflViolation: return "cfl-violation";
    case ErrorKind::PreShockHorizon: return "pre-shock-horizon";
    case ErrorKind::NonContraction: return "non-contraction";
    case ErrorKind::NewtonFailure: return "newton-failure";
    case ErrorKind::ValidityBall: return "validity-ball";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pulse_optics
