#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divr {

enum class ErrorKind {
    EmptyText,
    InvalidText,
    InvalidWeights,
    InvalidParameter,
    DegenerateRatings,
    InsufficientData,
    InvalidScore,
    EmptyGroup,
    MissingRoleAnswer,
    InvalidGroundTruth,
    TransportError,
    ProtocolError,
    BudgetExceeded,
    RoleParseError,
    NoValidPaths,
    InsufficientRoles,
    MissingOutput,
    DegenerateVariance,
    IoError,
    ParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI, the scoring service) can map it to an exit code or an
/// HTTP status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace divr
