#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace assist {

/// Normalized, workspace-relative document identifier.
class DocumentId {
public:
    DocumentId() = default;
    /// Normalizes `uri` (strips file://, folds separators, removes `root`
    /// prefix). Throws InvalidParams when the result is empty.
    explicit DocumentId(std::string_view uri, std::string_view root = {});

    const std::string& str() const noexcept { return uri_; }

    auto operator<=>(const DocumentId&) const = default;

private:
    std::string uri_;
};

/// Line plus byte column, both 0-based.
struct Position {
    std::size_t line = 0;
    std::size_t column = 0;

    auto operator<=>(const Position&) const = default;
};

/// Half-open [start, end).
struct Range {
    Position start;
    Position end;

    bool empty() const noexcept { return start == end; }
    auto operator<=>(const Range&) const = default;
};

enum class Severity { Error, Warning };

std::string_view severityName(Severity s);

struct Diagnostic {
    Range range;
    Severity severity = Severity::Error;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

/// A single range replacement, expressed against one document version.
struct TextEdit {
    Range range;
    std::string newText;

    bool operator==(const TextEdit&) const = default;
};

struct Document {
    DocumentId id;
    std::string languageId;
    std::int64_t version = 0;
    std::string content;
    std::vector<Diagnostic> diagnostics;

    std::size_t lineCount() const;
    /// Byte length of `line` without its terminating '\n'.
    std::size_t lineLength(std::size_t line) const;
    bool isValid(Position pos) const;
    bool isValid(const Range& range) const;
    /// Last position in the buffer.
    Position endPosition() const;
};

/// Byte offset of `pos`; throws InvalidPosition when out of bounds.
std::size_t resolveOffset(const Document& doc, Position pos);
/// Inverse of resolveOffset; throws InvalidPosition for offset > size.
Position positionAt(const Document& doc, std::size_t offset);

/// Validates `edits` against `doc` and returns them ordered by ascending
/// start. Throws RangeOutOfBounds or OverlappingEdits.
std::vector<TextEdit> normalizeEdits(const Document& doc, std::span<const TextEdit> edits);

/// Splices `edits` (already normalized) into `content`, last edit first.
std::string spliceEdits(const Document& doc, std::span<const TextEdit> edits);

/// Thread-safe set of open documents. Edits on one document serialize; edits
/// on different documents do not contend.
class Workspace {
public:
    /// Called after every committed edit, outside any workspace lock.
    using EditListener = std::function<void(const DocumentId&, std::int64_t newVersion)>;

    explicit Workspace(std::string root = {});

    DocumentId makeId(std::string_view uri) const { return DocumentId(uri, root_); }

    Document openDocument(const DocumentId& id, std::string languageId, std::string content);
    void closeDocument(const DocumentId& id);

    Document applyEdit(const DocumentId& id, std::int64_t expectedVersion, const Range& range,
                       std::string newText);
    /// Applies all edits atomically as a single version bump.
    Document applyEdits(const DocumentId& id, std::int64_t expectedVersion,
                        std::span<const TextEdit> edits);
    Document setDiagnostics(const DocumentId& id, std::vector<Diagnostic> diagnostics);

    Document snapshot(const DocumentId& id) const;
    bool isOpen(const DocumentId& id) const;
    std::int64_t version(const DocumentId& id) const;

    /// Returns a token; pass it to removeListener.
    std::size_t addListener(EditListener listener);
    void removeListener(std::size_t token);

private:
    struct Entry {
        mutable std::mutex mu;
        Document doc;
    };

    std::shared_ptr<Entry> find(const DocumentId& id) const;
    void notify(const DocumentId& id, std::int64_t version) const;

    std::string root_;
    mutable std::shared_mutex mu_;
    std::map<DocumentId, std::shared_ptr<Entry>> docs_;

    mutable std::shared_mutex listenersMu_;
    std::map<std::size_t, EditListener> listeners_;
    std::size_t nextListener_ = 1;
};

}  // namespace assist
