#pragma once

#include <stdexcept>
#include <string>

namespace framecs {

enum class ErrorKind {
  invalid_input,
  unsupported_norm,
  invalid_index,
  zero_range,
  invalid_dimension,
  invalid_counts,
  invalid_budget,
  division_guard,
  undefined_reference,
  dimension_mismatch,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::unsupported_norm: return "unsupported-norm";
    case ErrorKind::invalid_index: return "invalid-index";
    case ErrorKind::zero_range: return "zero-range";
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::invalid_counts: return "invalid-counts";
    case ErrorKind::invalid_budget: return "invalid-budget";
    case ErrorKind::division_guard: return "division-guard";
    case ErrorKind::undefined_reference: return "undefined-reference";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace framecs
