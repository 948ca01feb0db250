#pragma once

#include <stdexcept>
#include <string>

namespace ahflow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad grid, unstable dt, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A metric lost positivity or produced non-finite samples.
class DegenerateMetricError : public Error {
 public:
  DegenerateMetricError(int node, const std::string& what)
      : Error("metric degenerated at node " + std::to_string(node) + ": " + what), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

/// The recovered gauge map stopped being a diffeomorphism.
class GaugeFailure : public Error {
 public:
  using Error::Error;
};

/// lambda I - L is numerically singular.
class SingularResolventError : public Error {
 public:
  using Error::Error;
};

/// Least-squares fit could not be performed (too few points, non-finite data).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace ahflow
