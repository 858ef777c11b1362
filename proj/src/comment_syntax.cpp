#include "assist/comment_syntax.hpp"

#include <algorithm>
#include <cctype>
#include <initializer_list>

namespace assist {

namespace {

std::string lowercase(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

SyntaxRegistry::SyntaxRegistry()
{
    for (auto id : {"swift", "c", "cpp", "objective-c", "objective-cpp", "go", "rust", "typescript", "javascript",
                    "java", "kotlin", "csharp"}) {
        entries_[id] = CommentSyntax{id, "//", std::nullopt};
    }
    for (auto id : {"python", "shell", "toml", "yaml", "ruby", "perl", "r"}) {
        entries_[id] = CommentSyntax{id, "#", std::nullopt};
    }
    for (auto id : {"html", "xml"}) {
        entries_[id] = CommentSyntax{id, std::nullopt, std::pair<std::string, std::string>{"<!--", "-->"}};
    }
    // JSON and CSV have no comment form; comment mode would corrupt them.
    for (auto id : {"json", "csv"}) {
        entries_[id] = CommentSyntax{id, std::nullopt, std::nullopt};
    }
}

void SyntaxRegistry::override(CommentSyntax syntax)
{
    syntax.languageId = lowercase(syntax.languageId);
    auto key = syntax.languageId;
    entries_.insert_or_assign(std::move(key), std::move(syntax));
}

CommentSyntax SyntaxRegistry::lookup(std::string_view languageId) const noexcept
{
    auto key = lowercase(languageId);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return CommentSyntax{std::move(key), std::nullopt, std::nullopt};
    }
    return it->second;
}

}  // namespace assist
