#include "mcof/error.hpp"

namespace mcof {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::MissingFile: return "MissingFileError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingHeatmap: return "MissingHeatmap";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NoLabeledPixels: return "NoLabeledPixels";
    case ErrorKind::EmptyPartition: return "EmptyPartition";
    case ErrorKind::MultiClassImage: return "MultiClassImage";
    case ErrorKind::MissingSaliency: return "MissingSaliency";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Error";
}

bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::Format:
    case ErrorKind::Parse:
    case ErrorKind::MissingFile:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::MissingHeatmap:
    case ErrorKind::MultiClassImage:
    case ErrorKind::MissingSaliency:
    case ErrorKind::Config:
    case ErrorKind::EmptyDataset:
      return true;
    default:
      return false;
  }
}

}  // namespace mcof
