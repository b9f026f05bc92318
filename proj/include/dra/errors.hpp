#pragma once

#include <stdexcept>
#include <string>

namespace dra {

// Bad user input: malformed config, dimension mismatch, invalid parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: singular factorization, solver non-convergence,
// degenerate coefficients.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dra
