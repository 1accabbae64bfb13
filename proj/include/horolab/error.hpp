#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace horolab {

enum class ErrorKind {
  InvalidParams,   // constructor or operation preconditions violated
  Domain,          // point outside the chart, or a step escaping it
  Singular,        // singular metric, degenerate plane, ill-conditioned solve
  NonConvergence,  // iterative procedure did not meet its tolerance
  StepUnderflow,   // adaptive integrator could not make progress
  BlowUp,          // Riccati solution left every bounded set
  ModelViolation,  // a property the theory guarantees was observed to fail
  Config,          // experiment configuration rejected
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library. `value` carries the numeric payload
// some failures report (breakdown time, best residual, blow-up time).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<double> value = std::nullopt)
      : std::runtime_error(message), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  std::optional<double> value_;
};

}  // namespace horolab
