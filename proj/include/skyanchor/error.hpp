#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skyanchor {

enum class ErrorCode {
  // geometry
  PointBehindCamera,
  IdOutOfRange,
  TagOutsideFrustum,
  NonPositiveTagSize,
  InvalidIntrinsics,
  MalformedImage,
  // detection / pose
  ImageTooSmall,
  DegenerateCorners,
  SingularIntrinsics,
  DegenerateHomography,
  DivergedBehindCamera,
  InvalidFamily,
  InvalidParams,
  // planes
  TooFewPoints,
  DegenerateInput,
  InsufficientSupport,
  // simulation
  EmptyTrajectory,
  // weather
  NetworkError,
  SchemaError,
  ParseError,
  InvariantViolation,
  UnknownCity,
  NoDataYet,
  // mapping
  NegativeInput,
  OutOfRange,
  UnknownMetric,
  // config / io
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI, HTTP layer, poller) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace skyanchor
