#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mediate {

enum class ErrorKind {
  MissingColumn,
  BadTreatmentValue,
  NonFiniteValue,
  MissingValue,
  ParseError,
  DegenerateArm,
  SingularDesign,
  BandwidthTooLarge,
  SingularOmega,
  NoConvergence,
  NegativeVariance,
  ZeroStdError,
  DimensionMismatch,
  SpecParseError,
  InternalInconsistency,
  IoError,
  InvalidArgument,
};

constexpr std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::BadTreatmentValue: return "BadTreatmentValue";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DegenerateArm: return "DegenerateArm";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::BandwidthTooLarge: return "BandwidthTooLarge";
    case ErrorKind::SingularOmega: return "SingularOmega";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::ZeroStdError: return "ZeroStdError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SpecParseError: return "SpecParseError";
    case ErrorKind::InternalInconsistency: return "InternalInconsistency";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Errors raised while reading data or specs, as opposed to estimation failures.
constexpr bool is_input_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn:
    case ErrorKind::BadTreatmentValue:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::MissingValue:
    case ErrorKind::ParseError:
    case ErrorKind::DegenerateArm:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::SpecParseError:
    case ErrorKind::IoError:
    case ErrorKind::InvalidArgument:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace mediate
