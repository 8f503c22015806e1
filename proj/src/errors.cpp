#include "ehrhard/errors.hpp"

namespace ehrhard {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "domain";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Config: return "config";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Resource: return "resource";
    case ErrorCode::Io: return "io";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::CertificateInvalid: return "certificate-invalid";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace ehrhard
