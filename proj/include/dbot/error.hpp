#pragma once

#include <stdexcept>
#include <string>

namespace dbot {

// Typed failure categories; the CLI maps these onto exit codes.
enum class ErrorCode {
    InvariantViolation,
    DegenerateInput,
    InsufficientHistory,
    NotFound,
    SchemaViolation,
    ProviderError,
    MissingPlaceholder,
    NoScriptMatch,
    BackendUnavailable,
    MalformedOutput,
    UnknownDriver,
    PatchRejected,
    MissingFixture,
    ConfigError,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
        case ErrorCode::NoScriptMatch: return "NoScriptMatch";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::MalformedOutput: return "MalformedOutput";
        case ErrorCode::UnknownDriver: return "UnknownDriver";
        case ErrorCode::PatchRejected: return "PatchRejected";
        case ErrorCode::MissingFixture: return "MissingFixture";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code),
          detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

    // Provider failures carry whether a retry could succeed.
    Error& set_retryable(bool retryable) {
        retryable_ = retryable;
        return *this;
    }
    bool retryable() const noexcept { return retryable_; }

private:
    ErrorCode code_;
    std::string detail_;
    bool retryable_ = false;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace dbot
