#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecoavatar {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  non_finite,
  degenerate_fit,
  parse_error,
  io_error,
  unresolved_nodata,
  grid_mismatch,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::degenerate_fit: return "degenerate_fit";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::unresolved_nodata: return "unresolved_nodata";
    case ErrorCode::grid_mismatch: return "grid_mismatch";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` is what the CLI reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace ecoavatar
