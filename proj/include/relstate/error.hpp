#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relstate {

enum class ErrorKind {
  InvalidInput,
  DegenerateBasis,
  DegenerateMetric,
  UndefinedConditional,
  InvalidGrid,
  StepRejected,
  InvalidPath,
  NoZeroMode,
};

constexpr std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DegenerateBasis: return "DegenerateBasis";
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::UndefinedConditional: return "UndefinedConditional";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::InvalidPath: return "InvalidPath";
    case ErrorKind::NoZeroMode: return "NoZeroMode";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

// Thrown by integrators when an accepted step would leave the admissible set.
// suggested_step is what the caller should retry with.
class StepRejected : public Error {
 public:
  StepRejected(const std::string& what, double suggested)
      : Error(ErrorKind::StepRejected, what), suggested_step(suggested) {}

  double suggested_step;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace relstate
