#pragma once

#include <stdexcept>
#include <string>

namespace anchoralign {

enum class ErrorCode {
  kDimensionMismatch,
  kDegenerateRow,
  kNonSquare,
  kNoConvergence,
  kInvalidArgument,
  kBadMagic,
  kVersionMismatch,
  kUnsupportedDtype,
  kTruncated,
  kIdCountMismatch,
  kDuplicateId,
  kMalformed,
  kIo,
  kMissingTensor,
  kShapeMismatch,
  kNonFinite,
  kEmptyIntersection,
  kEmptyRelevance,
  kUnknownLanguage,
  kSingletonGroup,
  kInsufficientClusters,
  kInfeasible,
};

const char* to_string(ErrorCode code);

// Every failure raised by the toolkit. The code lets callers (tests, CLI
// exit-code mapping) distinguish failure classes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace anchoralign
