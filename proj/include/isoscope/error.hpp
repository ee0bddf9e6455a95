#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isoscope {

enum class ErrorKind {
  InvalidCloud,
  DegenerateCloud,
  InvalidDimension,
  EmptyRecord,
  UnsupportedFormat,
  CorruptStream,
  InvalidData,
  InsufficientData,
  MisalignedEvaluation,
  InsufficientLanguages,
  MissingLayer,
  UnknownLanguage,
  MisalignedBitext,
  InvalidArgument,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidCloud: return "InvalidCloud";
    case ErrorKind::DegenerateCloud: return "DegenerateCloud";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::EmptyRecord: return "EmptyRecord";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptStream: return "CorruptStream";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::MisalignedEvaluation: return "MisalignedEvaluation";
    case ErrorKind::InsufficientLanguages: return "InsufficientLanguages";
    case ErrorKind::MissingLayer: return "MissingLayer";
    case ErrorKind::UnknownLanguage: return "UnknownLanguage";
    case ErrorKind::MisalignedBitext: return "MisalignedBitext";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the toolkit; `kind()` carries the error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // I/O failures map to a distinct CLI exit code; everything else is validation.
  bool is_io() const noexcept { return kind_ == ErrorKind::IoError; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace isoscope
