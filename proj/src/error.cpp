#include "ragcomp/error.hpp"

namespace ragcomp {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::DataIntegrity: return "data-integrity";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::InsufficientCandidates: return "insufficient-candidates";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::State: return "state";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace ragcomp
