#pragma once

#include <stdexcept>
#include <string>

namespace adp {

/// Bad input: shapes, ranges, malformed files. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-convergence, factorization breakdown, divergence. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace adp
