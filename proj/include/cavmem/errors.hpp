#pragma once

#include <stdexcept>
#include <string>

namespace cavmem {

/// Bad inputs: violated preconditions, malformed configs, mismatched grids.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Failures of the numerics themselves: stability bound violations,
/// root-finding with no root, nonphysical intermediate results.
/// The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cavmem
