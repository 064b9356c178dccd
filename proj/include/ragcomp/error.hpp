#pragma once

#include <stdexcept>
#include <string>

namespace ragcomp {

// Error taxonomy shared by the C++ core and the C API status codes.
enum class ErrorKind {
  Io = 1,
  Parse,                   // malformed input file / schema violation
  Config,                  // invalid or inconsistent configuration
  DataIntegrity,           // input violates a dataset invariant
  Bounds,                  // request exceeds the available population
  Lookup,                  // unknown id
  InsufficientCandidates,  // not enough eligible passages for a condition
  Transport,               // HTTP-level failure after retries
  Protocol,                // endpoint replied with an unparseable body
  Contract,                // caller violated an operation precondition
  State,                   // missing stage output, held lock, etc.
  Internal,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string message) {
  throw Error(kind, std::move(message));
}

}  // namespace ragcomp
