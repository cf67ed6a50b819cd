#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace othello {

// Every failure the library reports carries one of these codes. The service
// maps them onto HTTP responses, the CLI onto exit messages.
enum class ErrorCode {
  kOccupiedSquare,
  kIllegalMove,
  kMalformed,
  kInsufficientRecords,
  kInvalidConfig,
  kSequenceTooLong,
  kBadToken,
  kShapeMismatch,
  kNonFinite,
  kContextFull,
  kCorruptCheckpoint,
  kEmptyInput,
  kIo,
  kUnknownModel,
  kUnknownSession,
  kUnknownJob,
  kNotYourTurn,
  kNotModelsTurn,
  kWrongMode,
  kAtStart,
  kAtEnd,
  kIllegalAhead,
  kConflict,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace othello
