#include "chrono_shield/error.hpp"

namespace chrono_shield {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnsupportedVariant: return "UnsupportedVariant";
    case ErrorCode::InvalidSigma: return "InvalidSigma";
    case ErrorCode::InvalidThresholds: return "InvalidThresholds";
    case ErrorCode::NoContourFound: return "NoContourFound";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::ManifestMissing: return "ManifestMissing";
    case ErrorCode::ManifestMalformed: return "ManifestMalformed";
    case ErrorCode::ImageUnreadable: return "ImageUnreadable";
    case ErrorCode::NetworkUnreachable: return "NetworkUnreachable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::InvalidRoute: return "InvalidRoute";
    case ErrorCode::MissingArchive: return "MissingArchive";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace chrono_shield
