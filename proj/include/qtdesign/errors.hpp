#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtdesign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (config files, device geometry, targets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure of a physics or quadrature evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The local wave number vanishes where a WKB form needs it.
class TurningPointError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Inputs fall outside the regime a closed form is valid for.
class RegimeError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NoIncidentWaveError : public NumericError {
 public:
  using NumericError::NumericError;
};

class EvanescentOutputError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SolverError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ResolutionError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Relative quadrature errors are undefined because a reference moment is not positive.
class ReferenceDegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// An integrand failed at one quadrature node; `node` holds its coordinates on [-1, 1].
class NodeEvaluationError : public NumericError {
 public:
  NodeEvaluationError(const std::string& what, std::vector<double> node)
      : NumericError(what), node_(std::move(node)) {}
  const std::vector<double>& node() const { return node_; }

 private:
  std::vector<double> node_;
};

/// The objective failed at an optimizer iterate.
class IterateError : public NumericError {
 public:
  IterateError(const std::string& what, std::vector<double> iterate)
      : NumericError(what), iterate_(std::move(iterate)) {}
  const std::vector<double>& iterate() const { return iterate_; }

 private:
  std::vector<double> iterate_;
};

/// An iterative procedure (optimizer, adaptive level selection) gave up.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qtdesign
