#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xfkt {

enum class ErrorKind {
    InvalidArgument,
    Io,
    ModeUnavailable,
    MalformedMatrix,
    DimensionMismatch,
    MalformedRecord,
    HistoryTooShort,
    EmptyPool,
    UnknownExercise,
    LeakedLabel,
    ProviderUnavailable,
    AuthError,
    BudgetExceeded,
    ReplayMiss,
    LengthMismatch,
    EmptyInput,
    SeedMismatch,
    CorruptResults,
};

std::string_view to_string(ErrorKind kind);

// Every failure the library raises carries a kind so callers (and the CLI
// exit-code table) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message,
          std::optional<std::size_t> line = std::nullopt);

    ErrorKind kind() const noexcept { return kind_; }
    // 1-based line number for parse errors in line-oriented inputs.
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> line_;
};

}  // namespace xfkt
