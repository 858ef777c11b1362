#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace assist {

/// Every failure the broker reports to a client. The numeric values are the
/// wire error codes; protocol-level codes follow JSON-RPC 2.0.
enum class ErrorCode : int {
    ParseError = -32700,
    InvalidRequest = -32600,
    MethodNotFound = -32601,
    InvalidParams = -32602,
    InternalError = -32603,
    Cancelled = -32800,

    // workspace
    NotOpen = -32001,
    AlreadyOpen = -32002,
    VersionMismatch = -32003,
    RangeOutOfBounds = -32004,
    InvalidPosition = -32005,

    // suggest
    SessionNotFound = -32010,
    SessionNotPresenting = -32011,
    EmptySession = -32012,
    StaleSession = -32013,
    UnsupportedCommentSyntax = -32014,

    // providers
    AllProvidersFailed = -32020,
    Timeout = -32021,
    AuthFailed = -32022,
    ProtocolError = -32023,
    NoProvider = -32024,

    // context
    MissingInstruction = -32030,
    UnknownPlaceholder = -32031,

    // chat
    NoCodeBlockInReply = -32040,
    OverlappingEdits = -32041,
    ConversationTooLong = -32042,
    ConversationNotFound = -32043,

    // cli
    ConfigInvalid = -32050,
    ScenarioUnknown = -32051,
    BindFailed = -32052,
};

std::string_view errorName(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, nlohmann::json data = nullptr)
        : std::runtime_error(message), code_(code), data_(std::move(data)) {}

    ErrorCode code() const noexcept { return code_; }
    const nlohmann::json& data() const noexcept { return data_; }

private:
    ErrorCode code_;
    nlohmann::json data_;
};

}  // namespace assist
