#pragma once

#include <stdexcept>
#include <string>

namespace afd {

/// Base class for failures of the numerical machinery (as opposed to bad
/// input, which is reported with std::invalid_argument / std::domain_error).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A prior predictive probability is not strictly positive, so Q(x,theta)
/// is undefined.
class PositivityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The moment function does not change sign over the requested bracket.
class BracketError : public NumericalError {
 public:
  BracketError(const std::string& what, double lo, double hi, double f_lo, double f_hi)
      : NumericalError(what), lo_(lo), hi_(hi), f_lo_(f_lo), f_hi_(f_hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double f_lo() const noexcept { return f_lo_; }
  double f_hi() const noexcept { return f_hi_; }

 private:
  double lo_, hi_, f_lo_, f_hi_;
};

class SingularJacobianError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Eigenvalues of Q outside [0,1] beyond rounding.
class SpectrumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Operation requires the dense representation of Q.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace afd
