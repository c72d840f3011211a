#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

// Process exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitMissingArtifact = 2,
  kExitValidation = 3,
  kExitDataError = 4,
};

/// A stage was asked to run before the artifacts it consumes exist.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or input failed a structural check (bad header, bad value,
/// missing required option).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed beyond the tolerated threshold.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingArtifactError*>(&e)) return kExitMissingArtifact;
  if (dynamic_cast<const DataError*>(&e)) return kExitDataError;
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const IoError*>(&e)) return kExitValidation;
  return kExitFailure;
}

}  // namespace nowcast
