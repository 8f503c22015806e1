#pragma once

#include <stdexcept>
#include <string>

namespace ehrhard {

enum class ErrorCode {
  Domain,
  InvalidArgument,
  Config,
  Infeasible,
  Unsupported,
  Resource,
  Io,
  Precondition,
  CertificateInvalid,
  Degenerate,
  Validation,
  Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace ehrhard
