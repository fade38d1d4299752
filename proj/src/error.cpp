#include "embclust/error.hpp"

namespace embclust {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::corrupt_header: return "corrupt_header";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::parse: return "parse";
    case ErrorCode::ragged_row: return "ragged_row";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::undefined_metric: return "undefined_metric";
    case ErrorCode::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace embclust
