#include "anchoralign/error.hpp"

namespace anchoralign {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kDegenerateRow: return "degenerate row";
    case ErrorCode::kNonSquare: return "non-square matrix";
    case ErrorCode::kNoConvergence: return "no convergence";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kUnsupportedDtype: return "unsupported dtype";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kIdCountMismatch: return "id count mismatch";
    case ErrorCode::kDuplicateId: return "duplicate id";
    case ErrorCode::kMalformed: return "malformed input";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kMissingTensor: return "missing tensor";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kEmptyIntersection: return "empty intersection";
    case ErrorCode::kEmptyRelevance: return "empty relevance";
    case ErrorCode::kUnknownLanguage: return "unknown language";
    case ErrorCode::kSingletonGroup: return "singleton group";
    case ErrorCode::kInsufficientClusters: return "insufficient clusters";
    case ErrorCode::kInfeasible: return "infeasible parameters";
  }
  return "error";
}

}  // namespace anchoralign
