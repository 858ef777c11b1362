#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "assist/workspace.hpp"

namespace assist {

/// Byte budgets for the pieces of a prompt context.
struct ContextCaps {
    std::size_t prefixBytes = 8000;
    std::size_t suffixBytes = 2000;
    std::size_t selectionBytes = 4000;
};

inline constexpr std::string_view kTruncationMarker = "\xE2\x80\xA6[truncated]";

struct Selection {
    Range range;
    std::string text;
};

/// Editor state handed to providers and templates.
struct PromptContext {
    std::string relativePath;
    std::string languageId;
    Position cursor;
    std::string prefix;
    std::string suffix;
    std::optional<Selection> selection;
    std::string diagnosticsRendered;
    bool truncated = false;
};

/// Builds a PromptContext from a document snapshot. Prefix is clipped at a
/// line start, suffix and selection at a line end; a line longer than the
/// whole budget is cut at a UTF-8 boundary instead.
PromptContext assembleContext(const Document& doc, Position cursor,
                              const std::optional<Range>& selection = std::nullopt,
                              const ContextCaps& caps = {});

/// One line per diagnostic: "<severity> <line>:<col> <message>".
std::string renderDiagnostics(const std::vector<Diagnostic>& diagnostics);

enum class Placeholder { Prefix, Suffix, Selection, FilePath, Language, Diagnostics, Cursor, Instruction };

/// A prompt body with `{{name}}` placeholders drawn from a closed set.
class Template {
public:
    /// Throws UnknownPlaceholder for any `{{` that does not open a known placeholder.
    Template(std::string name, std::string body);

    const std::string& name() const noexcept { return name_; }
    const std::string& body() const noexcept { return body_; }
    bool uses(Placeholder p) const;

    /// Substituted values are inserted verbatim and never re-expanded.
    std::string render(const PromptContext& ctx, const std::optional<std::string>& instruction = std::nullopt) const;

private:
    struct Piece {
        std::string literal;
        std::optional<Placeholder> slot;
    };

    std::string name_;
    std::string body_;
    std::vector<Piece> pieces_;
};

std::string renderTemplate(const Template& t, const PromptContext& ctx,
                           const std::optional<std::string>& instruction = std::nullopt);

/// Built-in templates: "chat_attachment", "prompt_to_code", plus the
/// refactoring presets ("split_function", "add_documentation", "fix_bugs",
/// "localize_strings").
std::map<std::string, Template> defaultTemplates();

}  // namespace assist
