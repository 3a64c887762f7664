#ifndef REINSURE_ERRORS_HPP
#define REINSURE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace reinsure {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up (curve length vs. grid, matrix dimensions).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Input that violates a documented invariant. `field()` names the offending
/// location, e.g. "reinsurer[1].loading".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical procedure failed to reach its tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The requested computation is not defined for the market's dependence regime.
class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

/// Linear premium targets that admit no solution.
class InfeasibleError : public Error {
 public:
  InfeasibleError(double gap, const std::string& what) : Error(what), gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

}  // namespace reinsure

#endif  // REINSURE_ERRORS_HPP
