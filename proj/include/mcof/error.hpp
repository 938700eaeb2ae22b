#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcof {

enum class ErrorKind {
  Io,
  Format,
  Parse,
  MissingFile,
  DimensionMismatch,
  MissingHeatmap,
  DegenerateData,
  NonFiniteLoss,
  NoLabeledPixels,
  EmptyPartition,
  MultiClassImage,
  MissingSaliency,
  Config,
  EmptyDataset,
  InvariantViolation,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library is an mcof::Error carrying a kind.
// Validation kinds map to CLI exit code 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

inline void check_dims(int w1, int h1, int w2, int h2, std::string_view what) {
  if (w1 != w2 || h1 != h2) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(w1) + "x" + std::to_string(h1) + " vs " +
                    std::to_string(w2) + "x" + std::to_string(h2));
  }
}

}  // namespace mcof
