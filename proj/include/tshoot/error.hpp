#pragma once

#include <stdexcept>
#include <string>

namespace tshoot {

enum class ErrorCode {
  parse_error,
  invalid_model,
  unknown_variable,
  unknown_state,
  cycle,
  impossible_evidence,
  mapping_overflow,
  inconsistent_model,
  model_exhausted,
  invalid_argument,
  not_found,
  conflict,
  not_active,
  contradiction,
  io_error,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; the code drives CLI exit status
// and HTTP problem mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tshoot
