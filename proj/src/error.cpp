#include "assist/error.hpp"

namespace assist {

std::string_view errorName(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::MethodNotFound: return "MethodNotFound";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InternalError: return "InternalError";
    case ErrorCode::Cancelled: return "Cancelled";
    case ErrorCode::NotOpen: return "NotOpen";
    case ErrorCode::AlreadyOpen: return "AlreadyOpen";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::InvalidPosition: return "InvalidPosition";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::SessionNotPresenting: return "SessionNotPresenting";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::StaleSession: return "StaleSession";
    case ErrorCode::UnsupportedCommentSyntax: return "UnsupportedCommentSyntax";
    case ErrorCode::AllProvidersFailed: return "AllProvidersFailed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::NoProvider: return "NoProvider";
    case ErrorCode::MissingInstruction: return "MissingInstruction";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::NoCodeBlockInReply: return "NoCodeBlockInReply";
    case ErrorCode::OverlappingEdits: return "OverlappingEdits";
    case ErrorCode::ConversationTooLong: return "ConversationTooLong";
    case ErrorCode::ConversationNotFound: return "ConversationNotFound";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ScenarioUnknown: return "ScenarioUnknown";
    case ErrorCode::BindFailed: return "BindFailed";
    }
    return "Unknown";
}

}  // namespace assist
