#pragma once

#include <stdexcept>
#include <string>

namespace clayer {

/// Bad input: out-of-range parameters, malformed configuration, violated preconditions.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A solver failed to reach its tolerance.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A spectral gap condition failed; the linear problem is (near) resonant.
struct ResonanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adjacent layers violate the separation constraint.
struct LayerOverlapError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace clayer
