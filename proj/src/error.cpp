#include "ctomics/error.hpp"

namespace ctomics {

const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::header_missing: return "header_missing";
    case ErrorCode::header_invalid: return "header_invalid";
    case ErrorCode::unsupported_dtype: return "unsupported_dtype";
    case ErrorCode::payload_size_mismatch: return "payload_size_mismatch";
    case ErrorCode::geometry_mismatch: return "geometry_mismatch";
    case ErrorCode::bad_mask_labels: return "bad_mask_labels";
    case ErrorCode::bad_argument: return "bad_argument";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::single_class: return "single_class";
    case ErrorCode::arity_mismatch: return "arity_mismatch";
    case ErrorCode::schema_error: return "schema_error";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::degenerate_folds: return "degenerate_folds";
    case ErrorCode::bad_config: return "bad_config";
  }
  return "unknown";
}

}  // namespace ctomics
