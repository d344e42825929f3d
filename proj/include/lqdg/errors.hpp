#pragma once

#include <stdexcept>
#include <string>

namespace lqdg {

// Malformed or dimensionally inconsistent input.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation requires a stabilizing closed loop (spectral radius < 1).
class UnstableError : public std::domain_error {
 public:
  explicit UnstableError(const std::string& what) : std::domain_error(what) {}
};

// Singular system, eigen-solver failure, non-finite values.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Rejection sampling ran out of attempts.
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lqdg
