#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chopthin {

/// Thrown when an argument violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation cannot proceed numerically, e.g. every particle
/// landed in a zero-likelihood region.
class DegeneracyError : public std::runtime_error {
 public:
  explicit DegeneracyError(const std::string& what, std::size_t step = 0)
      : std::runtime_error(what), step_(step) {}

  /// 1-based time step at which the degeneracy occurred, or 0 when the
  /// failure is not tied to a filter step.
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace chopthin
