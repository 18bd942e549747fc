#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ims {

/// Failure categories surfaced by the library. The names are stable and are
/// written verbatim into run summaries.
enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  RhsNotOrthogonal,
  SingularBeyondKernel,
  NonPositiveConcentration,
  GradientNotOrthogonal,
  MassCompatibilityViolated,
  PositivityViolated,
  CflViolated,
  InvariantViolated,
  LinearSolveFailed,
  InsufficientSamples,
  NonPositiveNorm,
  ParseError,
  ValidationError,
  IoError,
  HeaderMismatch,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RhsNotOrthogonal: return "RhsNotOrthogonal";
    case ErrorCode::SingularBeyondKernel: return "SingularBeyondKernel";
    case ErrorCode::NonPositiveConcentration: return "NonPositiveConcentration";
    case ErrorCode::GradientNotOrthogonal: return "GradientNotOrthogonal";
    case ErrorCode::MassCompatibilityViolated: return "MassCompatibilityViolated";
    case ErrorCode::PositivityViolated: return "PositivityViolated";
    case ErrorCode::CflViolated: return "CflViolated";
    case ErrorCode::InvariantViolated: return "InvariantViolated";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonPositiveNorm: return "NonPositiveNorm";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return to_string(code_); }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// One rejected configuration key.
struct ValidationIssue {
  std::string key;
  std::string reason;
};

/// Carries every validation issue found in a configuration, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(ErrorCode::ValidationError, describe(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string describe(const std::vector<ValidationIssue>& issues) {
    std::string out;
    for (const auto& issue : issues) {
      if (!out.empty()) out += "; ";
      out += issue.key + ": " + issue.reason;
    }
    return out;
  }

  std::vector<ValidationIssue> issues_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ims
