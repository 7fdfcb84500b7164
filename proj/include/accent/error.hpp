// accent/error.hpp

#pragma once

#include <stdexcept>
#include <string>

namespace accent {

/// Bad or missing input data (unreadable files, malformed lines, too few frames).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Artifacts that do not belong together, e.g. models trained under a
/// different front-end configuration than the features being scored.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace accent
