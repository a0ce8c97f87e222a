#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attrib {

enum class ErrorCode {
  MalformedManifest,
  DuplicateId,
  MissingImageFile,
  DimensionMismatch,
  ImageTooSmall,
  RectOutOfBounds,
  ClassMissing,
  TooFewWorks,
  BadTileShape,
  SingleClassData,
  NonFiniteLoss,
  UntrainedClassifier,
  UntrainedMember,
  EmptyTileList,
  MixedArtworks,
  EmptySplit,
  EmptyInput,
  GridMismatch,
  EmptyPredictions,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (tests, the CLI exit-status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace attrib
