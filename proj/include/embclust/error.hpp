#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace embclust {

enum class ErrorCode {
  io,
  bad_magic,
  version_mismatch,
  truncated,
  corrupt_header,
  duplicate_id,
  non_finite,
  parse,
  ragged_row,
  dimension_mismatch,
  invalid_argument,
  undefined_metric,
  numeric,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable category alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace embclust
