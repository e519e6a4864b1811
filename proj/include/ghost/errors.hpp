#pragma once

#include <stdexcept>
#include <string>

namespace ghost {

/// Error categories raised by the library. Tests and the CLI dispatch on
/// these instead of parsing message text.
enum class ErrorCode {
  non_positive_parameter,
  undersampled_grid,
  geometry_too_large,
  malformed_file,
  dimension_mismatch,
  unequal_arms,
  insufficient_samples,
  aliased_propagation,
  zero_mean_pixel,
  zero_mean,
  length_mismatch,
  all_zero_image,
  pass_order_violation,
  incompatible_accumulators,
  empty_region,
  peak_not_found,
  zero_variance,
  too_few_frames,
  unknown_key,
  bad_unit,
  missing_required,
  range_error,
  version_mismatch,
  io_error,
  invalid_argument,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::non_positive_parameter: return "NonPositiveParameter";
    case ErrorCode::undersampled_grid: return "UndersampledGrid";
    case ErrorCode::geometry_too_large: return "GeometryTooLargeForGrid";
    case ErrorCode::malformed_file: return "MalformedFile";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::unequal_arms: return "UnequalArms";
    case ErrorCode::insufficient_samples: return "InsufficientSamples";
    case ErrorCode::aliased_propagation: return "AliasedPropagation";
    case ErrorCode::zero_mean_pixel: return "ZeroMeanPixel";
    case ErrorCode::zero_mean: return "ZeroMean";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::all_zero_image: return "AllZeroImage";
    case ErrorCode::pass_order_violation: return "PassOrderViolation";
    case ErrorCode::incompatible_accumulators: return "IncompatibleAccumulators";
    case ErrorCode::empty_region: return "EmptyRegion";
    case ErrorCode::peak_not_found: return "PeakNotFound";
    case ErrorCode::zero_variance: return "ZeroVariance";
    case ErrorCode::too_few_frames: return "TooFewFrames";
    case ErrorCode::unknown_key: return "UnknownKey";
    case ErrorCode::bad_unit: return "BadUnit";
    case ErrorCode::missing_required: return "MissingRequired";
    case ErrorCode::range_error: return "RangeError";
    case ErrorCode::version_mismatch: return "VersionMismatch";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace ghost
