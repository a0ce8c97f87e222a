#include "attrib/error.hpp"

namespace attrib {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingImageFile: return "MissingImageFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::RectOutOfBounds: return "RectOutOfBounds";
    case ErrorCode::ClassMissing: return "ClassMissing";
    case ErrorCode::TooFewWorks: return "TooFewWorks";
    case ErrorCode::BadTileShape: return "BadTileShape";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UntrainedClassifier: return "UntrainedClassifier";
    case ErrorCode::UntrainedMember: return "UntrainedMember";
    case ErrorCode::EmptyTileList: return "EmptyTileList";
    case ErrorCode::MixedArtworks: return "MixedArtworks";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyPredictions: return "EmptyPredictions";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace attrib
