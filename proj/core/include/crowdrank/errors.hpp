#pragma once

#include <stdexcept>

namespace crowdrank {

// Invalid or missing input data, schema mismatches, invariant violations.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or numerical breakdown during training/scoring.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crowdrank
