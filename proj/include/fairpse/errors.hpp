#pragma once

#include <stdexcept>
#include <string>

namespace fairpse {

enum class ErrorCode {
  parse,
  data,
  unknown_column,
  rank_deficient,
  non_finite,
  not_converged,
  unsupported_scenario,
  not_identified,
  invalid_path_set,
  degenerate_variance,
  negative_discriminant,
  empty_feasible_interval,
  bad_spec,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::data: return "data";
    case ErrorCode::unknown_column: return "unknown_column";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::not_converged: return "not_converged";
    case ErrorCode::unsupported_scenario: return "unsupported_scenario";
    case ErrorCode::not_identified: return "not_identified";
    case ErrorCode::invalid_path_set: return "invalid_path_set";
    case ErrorCode::degenerate_variance: return "degenerate_variance";
    case ErrorCode::negative_discriminant: return "negative_discriminant";
    case ErrorCode::empty_feasible_interval: return "empty_feasible_interval";
    case ErrorCode::bad_spec: return "bad_spec";
  }
  return "unknown";
}

}  // namespace fairpse
