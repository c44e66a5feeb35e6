#pragma once

#include <stdexcept>
#include <string>

namespace empdis {

// Every failure the library can signal. Codes group into the CLI exit
// classes: config (2), data (3), artifact (4), metric (5).
enum class ErrorCode {
  // dataset
  MissingColumn,
  MalformedRow,
  NonNumericLabel,
  LabelOutOfRange,
  DuplicateId,
  MissingLabel,
  // encoders / training
  UnknownEncoder,
  EncoderLoadFailure,
  EmptySequence,
  DegenerateLabels,
  NonFiniteLoss,
  // ensemble
  ShapeMismatch,
  TargetMismatch,
  FingerprintMismatch,
  DegenerateGold,
  ColumnMismatch,
  // metrics
  LengthMismatch,
  ZeroVariance,
  TooFew,
  OutOfRange,
  // pipeline
  ConfigInvalid,
  MissingArtifact,
  AlignmentError,
  IoError,
};

const char* error_code_name(ErrorCode code);

// Process exit code class for a failure (0 is success, 1 unexpected).
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace empdis
