#include "skyanchor/error.hpp"

namespace skyanchor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointBehindCamera:
      return "PointBehindCamera";
    case ErrorCode::IdOutOfRange:
      return "IdOutOfRange";
    case ErrorCode::TagOutsideFrustum:
      return "TagOutsideFrustum";
    case ErrorCode::NonPositiveTagSize:
      return "NonPositiveTagSize";
    case ErrorCode::InvalidIntrinsics:
      return "InvalidIntrinsics";
    case ErrorCode::MalformedImage:
      return "MalformedImage";
    case ErrorCode::ImageTooSmall:
      return "ImageTooSmall";
    case ErrorCode::DegenerateCorners:
      return "DegenerateCorners";
    case ErrorCode::SingularIntrinsics:
      return "SingularIntrinsics";
    case ErrorCode::DegenerateHomography:
      return "DegenerateHomography";
    case ErrorCode::DivergedBehindCamera:
      return "DivergedBehindCamera";
    case ErrorCode::InvalidFamily:
      return "InvalidFamily";
    case ErrorCode::InvalidParams:
      return "InvalidParams";
    case ErrorCode::TooFewPoints:
      return "TooFewPoints";
    case ErrorCode::DegenerateInput:
      return "DegenerateInput";
    case ErrorCode::InsufficientSupport:
      return "InsufficientSupport";
    case ErrorCode::EmptyTrajectory:
      return "EmptyTrajectory";
    case ErrorCode::NetworkError:
      return "NetworkError";
    case ErrorCode::SchemaError:
      return "SchemaError";
    case ErrorCode::ParseError:
      return "ParseError";
    case ErrorCode::InvariantViolation:
      return "InvariantViolation";
    case ErrorCode::UnknownCity:
      return "UnknownCity";
    case ErrorCode::NoDataYet:
      return "NoDataYet";
    case ErrorCode::NegativeInput:
      return "NegativeInput";
    case ErrorCode::OutOfRange:
      return "OutOfRange";
    case ErrorCode::UnknownMetric:
      return "UnknownMetric";
    case ErrorCode::ConfigError:
      return "ConfigError";
    case ErrorCode::IoError:
      return "IoError";
  }
  return "Unknown";
}

}  // namespace skyanchor
