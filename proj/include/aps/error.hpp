#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aps {

enum class ErrorKind {
  Parse,
  Config,
  Precondition,
  StaleArtifact,
  Io,
  Gateway,
  Protocol,
  ProviderContract,
  Harness,
  Forge,
  Training,
  PipelineOrder,
  Shape,
  CheckpointCompat,
  Index,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::StaleArtifact: return "stale-artifact error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Gateway: return "gateway error";
    case ErrorKind::Protocol: return "protocol error";
    case ErrorKind::ProviderContract: return "provider-contract error";
    case ErrorKind::Harness: return "harness error";
    case ErrorKind::Forge: return "forge error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::PipelineOrder: return "ordered-stage error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::CheckpointCompat: return "checkpoint-compat error";
    case ErrorKind::Index: return "index error";
  }
  return "error";
}

// Every failure surfaced by the library is an aps::Error tagged with its kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace aps
