#pragma once

#include <stdexcept>
#include <string>

namespace xdcont {

enum class ErrorCode {
  invalid_argument,
  singular_parameters,
  divergence,
  no_start,
  step_failure,
  degenerate_point,
  invalid_bracket,
  switch_failure,
  insufficient_data,
  parse_error,
  validation_error,
  io_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::invalid_argument, message);
}

}  // namespace xdcont
