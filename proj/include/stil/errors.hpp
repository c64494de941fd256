#pragma once

#include <stdexcept>
#include <string>

namespace stil {

// Malformed or inconsistent input data (bad manifests, dimension
// mismatches, unknown identifiers). CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or failed numeric procedures. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stil
