#pragma once

#include <stdexcept>
#include <string>

namespace ilr {

enum class ErrorCode {
  invalid_argument,
  config,
  parse,
  io,
  coverage,
  protocol,
  replay_gap,
  transport,
  schema,
  internal,
};

inline const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::config: return "config";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::replay_gap: return "replay_gap";
    case ErrorCode::transport: return "transport";
    case ErrorCode::schema: return "schema";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ilr
