#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace assist {

struct CommentSyntax {
    std::string languageId;
    std::optional<std::string> linePrefix;
    std::optional<std::pair<std::string, std::string>> block;

    bool supported() const noexcept { return linePrefix.has_value() || block.has_value(); }
};

/// Per-language comment syntax. Unknown languages resolve to an unsupported
/// syntax value rather than an error. Immutable once built.
class SyntaxRegistry {
public:
    /// Registry preloaded with the shipped table.
    SyntaxRegistry();

    /// Shadows (or adds) the entry for `syntax.languageId`. An entry with
    /// neither form marks the language as comment-unsupported.
    void override(CommentSyntax syntax);

    /// Case-insensitive on languageId; never throws.
    CommentSyntax lookup(std::string_view languageId) const noexcept;

private:
    std::map<std::string, CommentSyntax, std::less<>> entries_;
};

}  // namespace assist
