#pragma once

#include <stdexcept>
#include <string>

namespace avtrack {

// Raised for malformed arguments: non-finite values, out-of-range angles,
// non-positive time steps, mismatched dimensions.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// The lateral dynamic model has 1/v terms; callers must fall back to the
// kinematic model below the cutoff speed.
class ModelSingularity : public std::domain_error {
 public:
  explicit ModelSingularity(const std::string& what) : std::domain_error(what) {}
};

// The expert failed to finish a data-collection episode.
class DataCollectionError : public std::runtime_error {
 public:
  explicit DataCollectionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace avtrack
