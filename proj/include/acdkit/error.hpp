#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace acdkit {

// Base of every error the library throws. Callers that only care about
// "something in acdkit failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data breaks a structural invariant (ordering, positivity, schema).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied parameter is outside its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A function was evaluated outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Conditional mean recursion produced a non-positive value.
class PositivityError : public Error {
 public:
  PositivityError(std::size_t index, double value)
      : Error("conditional mean non-positive at observation " + std::to_string(index) +
              " (psi = " + std::to_string(value) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class NonStationaryError : public Error {
 public:
  using Error::Error;
};

// The operation is not defined for the requested model form.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// A statistic has no value for the input (e.g. zero variance).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Numerical linear algebra failure (singular Hessian, rank-deficient design).
class SingularError : public Error {
 public:
  using Error::Error;
};

}  // namespace acdkit
