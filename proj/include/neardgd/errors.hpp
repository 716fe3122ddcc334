#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace neardgd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument to a library call: topology parameters out of range,
// disconnected custom graph, step length above the admissible bound, ...
struct InvalidParameterError : Error {
  using Error::Error;
};

// Mismatched matrix/vector shapes between collaborating objects.
struct DimensionError : Error {
  using Error::Error;
};

// Iterate norm exceeded the divergence guard during a run.
struct DivergedError : Error {
  DivergedError(const std::string& msg, long k)
      : Error(msg + " (iteration " + std::to_string(k) + ")"), iteration(k) {}
  long iteration;
};

// Malformed variant notation; `position` is the byte offset of the offence.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  std::size_t position;
};

// Invalid or inconsistent run configuration (file level, not CLI level).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem or serialization failure.
struct IoError : Error {
  using Error::Error;
};

// A diagnostic was requested on a trajectory that was not recorded with the
// data it needs (for example inner gradient iterates).
struct MissingDataError : Error {
  using Error::Error;
};

}  // namespace neardgd
