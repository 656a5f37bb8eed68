#include "divr/error.hpp"

namespace divr {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::EmptyText: return "EmptyText";
        case ErrorKind::InvalidText: return "InvalidText";
        case ErrorKind::InvalidWeights: return "InvalidWeights";
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::DegenerateRatings: return "DegenerateRatings";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::InvalidScore: return "InvalidScore";
        case ErrorKind::EmptyGroup: return "EmptyGroup";
        case ErrorKind::MissingRoleAnswer: return "MissingRoleAnswer";
        case ErrorKind::InvalidGroundTruth: return "InvalidGroundTruth";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::ProtocolError: return "ProtocolError";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::RoleParseError: return "RoleParseError";
        case ErrorKind::NoValidPaths: return "NoValidPaths";
        case ErrorKind::InsufficientRoles: return "InsufficientRoles";
        case ErrorKind::MissingOutput: return "MissingOutput";
        case ErrorKind::DegenerateVariance: return "DegenerateVariance";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace divr
