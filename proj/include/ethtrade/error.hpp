#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ethtrade {

enum class ErrorCode {
  InvalidSpec,
  DimensionLimit,
  ConvergenceFailure,
  ShellEmpty,
  SingularLocalState,
  InternalConsistency,
  IdentityFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DimensionLimit: return "DimensionLimit";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ShellEmpty: return "ShellEmpty";
    case ErrorCode::SingularLocalState: return "SingularLocalState";
    case ErrorCode::InternalConsistency: return "InternalConsistency";
    case ErrorCode::IdentityFailure: return "IdentityFailure";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace ethtrade
