#pragma once

#include <stdexcept>
#include <string>

namespace vmb {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct UnsupportedKernelError : Error { using Error::Error; };
struct ResourceError : Error { using Error::Error; };
struct SingularSolveError : Error { using Error::Error; };
struct GaussInconsistencyError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ChecksumError : IoError { using IoError::IoError; };
struct TrajectoryError : Error { using Error::Error; };

// Raised when a run produces non-finite values; the solver dumps the last
// frames before throwing.
struct NumericalAbort : Error { using Error::Error; };

}  // namespace vmb
