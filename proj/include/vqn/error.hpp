#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vqn {

enum class ErrorCode {
    invalid_channel,
    unsupported_channel,
    invalid_argument,
    malformed_header,
    unsorted_records,
    truncated_file,
    io_error,
    duration_mismatch,
    config_error,
    no_peak,
    undefined_car,
    non_finite,
    unknown_channel,
    unauthorized,
    forbidden,
    not_found,
    conflict,
    validation,
    unavailable,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code is
/// stable and is what the HTTP layer and CLI map to status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(message), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    /// Offending input field, when the error is a validation failure.
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

} // namespace vqn
