#pragma once

#include <stdexcept>
#include <string>

namespace fricke {

/// Malformed or inconsistent input data (bad records, missing labels, I/O).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller passed arguments that violate an operation's preconditions.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Pooled covariance could not be factored at the requested shrinkage.
class SingularCovariance : public std::runtime_error {
 public:
  SingularCovariance(const std::string& what, double gamma)
      : std::runtime_error(what), gamma_(gamma) {}
  double gamma() const noexcept { return gamma_; }

 private:
  double gamma_;
};

/// Training produced a non-finite loss or gradient.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fricke
