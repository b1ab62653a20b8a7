#pragma once

#include <stdexcept>
#include <string>

namespace dgcc {

enum class ErrorCode {
  kSchema,
  kConstraint,
  kDecode,
  kAudit,
  kDurability,
  kUsage,
  kScheduling,
  kIo,
};

const char* error_code_name(ErrorCode code) noexcept;

// Single exception type for the engine; the code drives C API status mapping
// and CLI exit codes.
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

}  // namespace dgcc
