#pragma once

#include <stdexcept>
#include <string>

namespace cdk {

// Configuration / input-file problems. The CLI maps these to exit code 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures at runtime (singularities, non-finite values, bad
// containers). The CLI maps these, and any other runtime error, to exit 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cdk
