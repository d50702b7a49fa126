#pragma once

#include <stdexcept>
#include <string>

namespace ctomics {

enum class ErrorCode {
  io_error,
  header_missing,
  header_invalid,
  unsupported_dtype,
  payload_size_mismatch,
  geometry_mismatch,
  bad_mask_labels,
  bad_argument,
  empty_input,
  single_class,
  arity_mismatch,
  schema_error,
  version_mismatch,
  degenerate_folds,
  bad_config,
};

const char* to_string(ErrorCode c);

// Every library failure throws this; code() is the machine-checkable cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace ctomics
