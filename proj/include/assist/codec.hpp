#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "assist/chat.hpp"
#include "assist/suggest.hpp"
#include "assist/workspace.hpp"

namespace assist {

using json = nlohmann::json;

// Wire shapes of the domain types. Encoders are total; decoders throw
// InvalidParams naming the offending field.

json toJson(Position p);
json toJson(const Range& r);
json toJson(const Diagnostic& d);
json toJson(const TextEdit& e);
json toJson(const Document& d);
json toJson(const Suggestion& s);
json toJson(const SuggestionSession& s);
json toJson(const Patch& p);
json toJson(const ChatMessage& m);
json toJson(const Conversation& c);

Position positionFrom(const json& j, std::string_view field);
Range rangeFrom(const json& j, std::string_view field);
Diagnostic diagnosticFrom(const json& j, std::string_view field);
TextEdit textEditFrom(const json& j, std::string_view field);
Patch patchFrom(const json& j, std::string_view field, const Workspace& ws);

/// Member `key` of the params object, or InvalidParams when absent.
const json& required(const json& params, std::string_view key);
std::string requiredString(const json& params, std::string_view key);
std::int64_t requiredInt(const json& params, std::string_view key);
std::optional<std::string> optionalString(const json& params, std::string_view key);
std::optional<std::int64_t> optionalInt(const json& params, std::string_view key);
std::optional<bool> optionalBool(const json& params, std::string_view key);

}  // namespace assist
