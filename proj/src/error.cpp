#include "sqg/error.hpp"

namespace sqg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kRemoteFeaturizerUnavailable: return "RemoteFeaturizerUnavailable";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kMissingCategoryExamples: return "MissingCategoryExamples";
    case ErrorCode::kInvalidPattern: return "InvalidPattern";
    case ErrorCode::kDuplicateRuleId: return "DuplicateRuleId";
    case ErrorCode::kCategoryMissing: return "CategoryMissing";
    case ErrorCode::kNotReady: return "NotReady";
    case ErrorCode::kStorageFailure: return "StorageFailure";
    case ErrorCode::kUnknownQueryId: return "UnknownQueryId";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyScope: return "EmptyScope";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kUnknownSample: return "UnknownSample";
    case ErrorCode::kAlreadyLabeled: return "AlreadyLabeled";
    case ErrorCode::kUndefined: return "Undefined";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kWindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCorruptModel: return "CorruptModel";
  }
  return "Unknown";
}

}  // namespace sqg
