#include "assist/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

#include "assist/error.hpp"

namespace assist {

namespace {

nlohmann::json positionJson(Position p)
{
    return {{"line", p.line}, {"column", p.column}};
}

// Byte offsets of each line start; always at least one entry.
std::vector<std::size_t> lineStarts(std::string_view text)
{
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            starts.push_back(i + 1);
        }
    }
    return starts;
}

}  // namespace

DocumentId::DocumentId(std::string_view uri, std::string_view root)
{
    std::string s(uri);
    if (s.starts_with("file://")) {
        s.erase(0, 7);
    }
    std::replace(s.begin(), s.end(), '\\', '/');
    if (!s.empty()) {
        s = std::filesystem::path(s).lexically_normal().generic_string();
    }
    if (!root.empty()) {
        std::string r = std::filesystem::path(std::string(root)).lexically_normal().generic_string();
        if (!r.ends_with('/')) {
            r += '/';
        }
        if (s.starts_with(r)) {
            s.erase(0, r.size());
        }
    }
    while (s.starts_with("./")) {
        s.erase(0, 2);
    }
    if (s.empty() || s == ".") {
        throw Error(ErrorCode::InvalidParams, "document uri must not be empty");
    }
    uri_ = std::move(s);
}

std::string_view severityName(Severity s)
{
    return s == Severity::Error ? "error" : "warning";
}

std::size_t Document::lineCount() const
{
    return static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n')) + 1;
}

std::size_t Document::lineLength(std::size_t line) const
{
    std::size_t start = 0;
    for (std::size_t i = 0; i < line; ++i) {
        auto nl = content.find('\n', start);
        if (nl == std::string::npos) {
            throw Error(ErrorCode::InvalidPosition, "line out of range", {{"line", line}});
        }
        start = nl + 1;
    }
    auto nl = content.find('\n', start);
    return (nl == std::string::npos ? content.size() : nl) - start;
}

bool Document::isValid(Position pos) const
{
    if (pos.line >= lineCount()) {
        return false;
    }
    return pos.column <= lineLength(pos.line);
}

bool Document::isValid(const Range& range) const
{
    return isValid(range.start) && isValid(range.end) && range.start <= range.end;
}

Position Document::endPosition() const
{
    auto lastNl = content.rfind('\n');
    std::size_t line = lineCount() - 1;
    std::size_t column = lastNl == std::string::npos ? content.size() : content.size() - lastNl - 1;
    return {line, column};
}

std::size_t resolveOffset(const Document& doc, Position pos)
{
    auto starts = lineStarts(doc.content);
    if (pos.line >= starts.size()) {
        throw Error(ErrorCode::InvalidPosition, "position beyond last line", positionJson(pos));
    }
    std::size_t lineEnd = pos.line + 1 < starts.size() ? starts[pos.line + 1] - 1 : doc.content.size();
    if (starts[pos.line] + pos.column > lineEnd) {
        throw Error(ErrorCode::InvalidPosition, "column beyond end of line", positionJson(pos));
    }
    return starts[pos.line] + pos.column;
}

Position positionAt(const Document& doc, std::size_t offset)
{
    if (offset > doc.content.size()) {
        throw Error(ErrorCode::InvalidPosition, "offset beyond end of document", {{"offset", offset}});
    }
    auto starts = lineStarts(doc.content);
    auto it = std::upper_bound(starts.begin(), starts.end(), offset);
    std::size_t line = static_cast<std::size_t>(it - starts.begin()) - 1;
    return {line, offset - starts[line]};
}

std::vector<TextEdit> normalizeEdits(const Document& doc, std::span<const TextEdit> edits)
{
    std::vector<TextEdit> sorted(edits.begin(), edits.end());
    for (const auto& e : sorted) {
        if (!doc.isValid(e.range)) {
            throw Error(ErrorCode::RangeOutOfBounds, "edit range outside document",
                        {{"start", positionJson(e.range.start)}, {"end", positionJson(e.range.end)}});
        }
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TextEdit& a, const TextEdit& b) { return a.range < b.range; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const auto& prev = sorted[i - 1].range;
        const auto& cur = sorted[i].range;
        // Two insertions at one point have no defined order, so they count as overlapping.
        bool sameInsertionPoint = prev.empty() && cur.empty() && prev.start == cur.start;
        if (cur.start < prev.end || sameInsertionPoint) {
            throw Error(ErrorCode::OverlappingEdits, "edits overlap",
                        {{"first", i - 1}, {"second", i}});
        }
    }
    return sorted;
}

std::string spliceEdits(const Document& doc, std::span<const TextEdit> edits)
{
    std::string out = doc.content;
    for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
        std::size_t begin = resolveOffset(doc, it->range.start);
        std::size_t end = resolveOffset(doc, it->range.end);
        out.replace(begin, end - begin, it->newText);
    }
    return out;
}

Workspace::Workspace(std::string root) : root_(std::move(root)) {}

std::shared_ptr<Workspace::Entry> Workspace::find(const DocumentId& id) const
{
    std::shared_lock lock(mu_);
    auto it = docs_.find(id);
    if (it == docs_.end()) {
        throw Error(ErrorCode::NotOpen, "document not open: " + id.str(), {{"uri", id.str()}});
    }
    return it->second;
}

Document Workspace::openDocument(const DocumentId& id, std::string languageId, std::string content)
{
    std::transform(languageId.begin(), languageId.end(), languageId.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto entry = std::make_shared<Entry>();
    entry->doc = Document{id, std::move(languageId), 0, std::move(content), {}};
    std::unique_lock lock(mu_);
    auto [it, inserted] = docs_.emplace(id, entry);
    if (!inserted) {
        throw Error(ErrorCode::AlreadyOpen, "document already open: " + id.str(), {{"uri", id.str()}});
    }
    return entry->doc;
}

void Workspace::closeDocument(const DocumentId& id)
{
    std::unique_lock lock(mu_);
    if (docs_.erase(id) == 0) {
        throw Error(ErrorCode::NotOpen, "document not open: " + id.str(), {{"uri", id.str()}});
    }
}

Document Workspace::applyEdit(const DocumentId& id, std::int64_t expectedVersion, const Range& range,
                              std::string newText)
{
    TextEdit edit{range, std::move(newText)};
    return applyEdits(id, expectedVersion, std::span<const TextEdit>(&edit, 1));
}

Document Workspace::applyEdits(const DocumentId& id, std::int64_t expectedVersion,
                               std::span<const TextEdit> edits)
{
    auto entry = find(id);
    Document result;
    {
        std::lock_guard lock(entry->mu);
        Document& doc = entry->doc;
        if (doc.version != expectedVersion) {
            throw Error(ErrorCode::VersionMismatch, "document version mismatch",
                        {{"expected", expectedVersion}, {"actual", doc.version}});
        }
        auto sorted = normalizeEdits(doc, edits);
        doc.content = spliceEdits(doc, sorted);
        ++doc.version;
        result = doc;
    }
    notify(id, result.version);
    return result;
}

Document Workspace::setDiagnostics(const DocumentId& id, std::vector<Diagnostic> diagnostics)
{
    auto entry = find(id);
    std::lock_guard lock(entry->mu);
    for (const auto& d : diagnostics) {
        if (!entry->doc.isValid(d.range)) {
            throw Error(ErrorCode::RangeOutOfBounds, "diagnostic range outside document",
                        {{"start", positionJson(d.range.start)}, {"end", positionJson(d.range.end)}});
        }
    }
    entry->doc.diagnostics = std::move(diagnostics);
    return entry->doc;
}

Document Workspace::snapshot(const DocumentId& id) const
{
    auto entry = find(id);
    std::lock_guard lock(entry->mu);
    return entry->doc;
}

bool Workspace::isOpen(const DocumentId& id) const
{
    std::shared_lock lock(mu_);
    return docs_.contains(id);
}

std::int64_t Workspace::version(const DocumentId& id) const
{
    auto entry = find(id);
    std::lock_guard lock(entry->mu);
    return entry->doc.version;
}

std::size_t Workspace::addListener(EditListener listener)
{
    std::unique_lock lock(listenersMu_);
    std::size_t token = nextListener_++;
    listeners_.emplace(token, std::move(listener));
    return token;
}

void Workspace::removeListener(std::size_t token)
{
    std::unique_lock lock(listenersMu_);
    listeners_.erase(token);
}

void Workspace::notify(const DocumentId& id, std::int64_t version) const
{
    std::shared_lock lock(listenersMu_);
    for (const auto& [_, listener] : listeners_) {
        listener(id, version);
    }
}

}  // namespace assist
