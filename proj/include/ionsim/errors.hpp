#pragma once

#include <stdexcept>

namespace ionsim {

// Precondition violation on a domain type or an operation input.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Problem in a scenario/config file, reported with the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A fragment cannot traverse a field segment (turning point inside it).
struct ReflectedParticleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fit failures: no significant peak, degenerate data, non-convergence.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rate-equation model applied outside its validity range.
struct ModelValidityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Signal/background run mismatch: corrected singles unusable.
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ionsim
