#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chrono_shield {

enum class ErrorCode {
  MalformedFile,
  UnsupportedVariant,
  InvalidSigma,
  InvalidThresholds,
  NoContourFound,
  ShapeMismatch,
  EmptyDataset,
  LabelOutOfRange,
  BadMagic,
  VersionUnsupported,
  ChecksumMismatch,
  InvalidConfig,
  DegenerateMask,
  ManifestMissing,
  ManifestMalformed,
  ImageUnreadable,
  NetworkUnreachable,
  ProtocolError,
  InvalidRoute,
  MissingArchive,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& detail);

}  // namespace chrono_shield
