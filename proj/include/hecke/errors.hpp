#pragma once

#include <stdexcept>
#include <string>

namespace hecke {

/// Raised when an enumeration or sum would exceed its configured ceiling.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an iterative numerical method fails to reach its target.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hecke
