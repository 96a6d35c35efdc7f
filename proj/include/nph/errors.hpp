#pragma once

#include <stdexcept>
#include <string>

namespace nph {

/// File or format problem; carries the offending path in the message.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Inputs violate an operation precondition.
class InvalidInput : public std::runtime_error {
public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Affine estimation finished below the usable overlap threshold.
class RegistrationFailure : public std::runtime_error {
public:
  RegistrationFailure(const std::string& what, double achieved_dice)
      : std::runtime_error(what), dice(achieved_dice) {}
  double dice;
};

/// A contour evolution lost its inside or outside region.
class DegenerateContour : public std::runtime_error {
public:
  explicit DegenerateContour(const std::string& what, int iteration = -1)
      : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

/// The SMO solver hit its iteration cap; carries the residual KKT violation.
class SvmNonConvergence : public std::runtime_error {
public:
  SvmNonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

}  // namespace nph
