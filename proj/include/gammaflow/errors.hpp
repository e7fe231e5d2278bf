#pragma once

#include <stdexcept>
#include <string>

namespace gammaflow {

// Input or precondition violations. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not reach its stopping criterion. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gammaflow
