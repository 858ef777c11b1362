#include "assist/codec.hpp"

#include "assist/error.hpp"

namespace assist {

namespace {

[[noreturn]] void badField(std::string_view field, std::string_view why)
{
    throw Error(ErrorCode::InvalidParams, std::string(field) + ": " + std::string(why), {{"field", field}});
}

std::size_t nonNegative(const json& j, std::string_view field)
{
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
        badField(field, "expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

std::string child(std::string_view parent, std::string_view key)
{
    return std::string(parent) + "." + std::string(key);
}

}  // namespace

json toJson(Position p)
{
    return {{"line", p.line}, {"column", p.column}};
}

json toJson(const Range& r)
{
    return {{"start", toJson(r.start)}, {"end", toJson(r.end)}};
}

json toJson(const Diagnostic& d)
{
    return {{"range", toJson(d.range)}, {"severity", severityName(d.severity)}, {"message", d.message}};
}

json toJson(const TextEdit& e)
{
    return {{"range", toJson(e.range)}, {"newText", e.newText}};
}

json toJson(const Document& d)
{
    json diags = json::array();
    for (const auto& x : d.diagnostics) {
        diags.push_back(toJson(x));
    }
    return {{"uri", d.id.str()},
            {"languageId", d.languageId},
            {"version", d.version},
            {"content", d.content},
            {"lineCount", d.lineCount()},
            {"diagnostics", std::move(diags)}};
}

json toJson(const Suggestion& s)
{
    return {{"id", s.id},
            {"replaceRange", toJson(s.replaceRange)},
            {"text", s.text},
            {"providerId", s.providerId},
            {"ordinal", s.ordinal}};
}

json toJson(const SuggestionSession& s)
{
    json list = json::array();
    for (const auto& x : s.suggestions) {
        list.push_back(toJson(x));
    }
    return {{"sessionId", s.sessionId},
            {"documentId", s.documentId.str()},
            {"boundVersion", s.boundVersion},
            {"cursor", toJson(s.cursor)},
            {"suggestions", std::move(list)},
            {"activeIndex", s.activeIndex},
            {"state", sessionStateName(s.state)},
            {"mode", presentationModeName(s.mode)},
            {"commentBlock", s.commentBlock ? json{{"insertedRange", toJson(s.commentBlock->insertedRange)}} : json()}};
}

json toJson(const Patch& p)
{
    json edits = json::array();
    for (const auto& e : p.edits) {
        edits.push_back(toJson(e));
    }
    return {{"documentId", p.documentId.str()}, {"baseVersion", p.baseVersion}, {"edits", std::move(edits)}};
}

json toJson(const ChatMessage& m)
{
    return {{"role", chatRoleName(m.role)}, {"content", m.content}};
}

json toJson(const Conversation& c)
{
    json messages = json::array();
    for (const auto& m : c.messages) {
        messages.push_back(toJson(m));
    }
    json attachments = json::array();
    for (const auto& a : c.attachments) {
        attachments.push_back({{"relativePath", a.relativePath},
                               {"selectionBytes", a.selection ? a.selection->text.size() : 0}});
    }
    return {{"id", c.id}, {"createdAt", c.createdAt}, {"messages", std::move(messages)}, {"attachments", attachments}};
}

Position positionFrom(const json& j, std::string_view field)
{
    if (!j.is_object() || !j.contains("line") || !j.contains("column")) {
        badField(field, "expected {line, column}");
    }
    return {nonNegative(j["line"], child(field, "line")), nonNegative(j["column"], child(field, "column"))};
}

Range rangeFrom(const json& j, std::string_view field)
{
    if (!j.is_object() || !j.contains("start") || !j.contains("end")) {
        badField(field, "expected {start, end}");
    }
    Range r{positionFrom(j["start"], child(field, "start")), positionFrom(j["end"], child(field, "end"))};
    if (r.end < r.start) {
        badField(field, "end precedes start");
    }
    return r;
}

Diagnostic diagnosticFrom(const json& j, std::string_view field)
{
    if (!j.is_object()) {
        badField(field, "expected an object");
    }
    Diagnostic d;
    d.range = rangeFrom(j.contains("range") ? j["range"] : json(), child(field, "range"));
    auto sev = j.contains("severity") && j["severity"].is_string() ? j["severity"].get<std::string>() : "";
    if (sev == "error") {
        d.severity = Severity::Error;
    } else if (sev == "warning") {
        d.severity = Severity::Warning;
    } else {
        badField(child(field, "severity"), "expected \"error\" or \"warning\"");
    }
    if (!j.contains("message") || !j["message"].is_string()) {
        badField(child(field, "message"), "expected a string");
    }
    d.message = j["message"].get<std::string>();
    return d;
}

TextEdit textEditFrom(const json& j, std::string_view field)
{
    if (!j.is_object() || !j.contains("newText") || !j["newText"].is_string()) {
        badField(field, "expected {range, newText}");
    }
    return {rangeFrom(j.contains("range") ? j["range"] : json(), child(field, "range")), j["newText"].get<std::string>()};
}

Patch patchFrom(const json& j, std::string_view field, const Workspace& ws)
{
    if (!j.is_object()) {
        badField(field, "expected an object");
    }
    Patch p;
    p.documentId = ws.makeId(requiredString(j, "documentId"));
    p.baseVersion = requiredInt(j, "baseVersion");
    const auto& edits = required(j, "edits");
    if (!edits.is_array()) {
        badField(child(field, "edits"), "expected an array");
    }
    for (std::size_t i = 0; i < edits.size(); ++i) {
        p.edits.push_back(textEditFrom(edits[i], child(field, "edits[" + std::to_string(i) + "]")));
    }
    return p;
}

const json& required(const json& params, std::string_view key)
{
    if (!params.is_object()) {
        badField(key, "params must be an object");
    }
    auto it = params.find(key);
    if (it == params.end()) {
        badField(key, "missing");
    }
    return *it;
}

std::string requiredString(const json& params, std::string_view key)
{
    const auto& v = required(params, key);
    if (!v.is_string()) {
        badField(key, "expected a string");
    }
    return v.get<std::string>();
}

std::int64_t requiredInt(const json& params, std::string_view key)
{
    const auto& v = required(params, key);
    if (!v.is_number_integer()) {
        badField(key, "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::optional<std::string> optionalString(const json& params, std::string_view key)
{
    if (!params.is_object() || !params.contains(key) || params[std::string(key)].is_null()) {
        return std::nullopt;
    }
    return requiredString(params, key);
}

std::optional<std::int64_t> optionalInt(const json& params, std::string_view key)
{
    if (!params.is_object() || !params.contains(key) || params[std::string(key)].is_null()) {
        return std::nullopt;
    }
    return requiredInt(params, key);
}

std::optional<bool> optionalBool(const json& params, std::string_view key)
{
    if (!params.is_object() || !params.contains(key) || params[std::string(key)].is_null()) {
        return std::nullopt;
    }
    const auto& v = params[std::string(key)];
    if (!v.is_boolean()) {
        badField(key, "expected a boolean");
    }
    return v.get<bool>();
}

}  // namespace assist
