#include "vqn/error.hpp"

namespace vqn {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_channel: return "invalid_channel";
    case ErrorCode::unsupported_channel: return "unsupported_channel";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::malformed_header: return "malformed_header";
    case ErrorCode::unsorted_records: return "unsorted_records";
    case ErrorCode::truncated_file: return "truncated_file";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::duration_mismatch: return "duration_mismatch";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::no_peak: return "no_peak";
    case ErrorCode::undefined_car: return "undefined_car";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::unknown_channel: return "unknown_channel";
    case ErrorCode::unauthorized: return "unauthorized";
    case ErrorCode::forbidden: return "forbidden";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::validation: return "validation";
    case ErrorCode::unavailable: return "unavailable";
    }
    return "unknown";
}

} // namespace vqn
