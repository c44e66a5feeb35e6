#include <cstdio>

#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"
#include "empdis/types.hpp"

namespace empdis {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonNumericLabel: return "NonNumericLabel";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::UnknownEncoder: return "UnknownEncoder";
    case ErrorCode::EncoderLoadFailure: return "EncoderLoadFailure";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TargetMismatch: return "TargetMismatch";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::DegenerateGold: return "DegenerateGold";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFew: return "TooFew";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::UnknownEncoder:
      return 2;
    case ErrorCode::MissingColumn:
    case ErrorCode::MalformedRow:
    case ErrorCode::NonNumericLabel:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::DuplicateId:
    case ErrorCode::MissingLabel:
    case ErrorCode::EmptySequence:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::TargetMismatch:
    case ErrorCode::FingerprintMismatch:
    case ErrorCode::ColumnMismatch:
    case ErrorCode::AlignmentError:
    case ErrorCode::IoError:
      return 3;
    case ErrorCode::EncoderLoadFailure:
    case ErrorCode::MissingArtifact:
      return 4;
    case ErrorCode::DegenerateLabels:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateGold:
    case ErrorCode::LengthMismatch:
    case ErrorCode::ZeroVariance:
    case ErrorCode::TooFew:
    case ErrorCode::OutOfRange:
      return 5;
  }
  return 1;
}

const char* to_string(Target t) {
  return t == Target::empathy ? "empathy" : "distress";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Target target_from_string(std::string_view s) {
  if (s == "empathy") return Target::empathy;
  if (s == "distress") return Target::distress;
  raise(ErrorCode::ConfigInvalid, "unknown target '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  raise(ErrorCode::ConfigInvalid, "unknown split '" + std::string(s) + "'");
}

std::string fingerprint_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string Fingerprint::hex() const { return fingerprint_hex(state_); }

}  // namespace empdis
