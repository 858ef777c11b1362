#include "assist/context.hpp"

#include <array>

#include "assist/error.hpp"

namespace assist {

namespace {

bool isContinuationByte(char c)
{
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

// Keeps at most `cap` trailing bytes, starting at a line start when one
// exists inside the window.
std::string clipFront(std::string_view text, std::size_t cap)
{
    if (text.size() <= cap) {
        return std::string(text);
    }
    std::size_t windowStart = text.size() - cap;
    auto nl = text.find('\n', windowStart - 1);
    std::size_t start = windowStart;
    if (nl != std::string_view::npos) {
        start = nl + 1;
    } else {
        while (start < text.size() && isContinuationByte(text[start])) {
            ++start;
        }
    }
    return std::string(text.substr(start));
}

// Keeps at most `cap` leading bytes, ending after a '\n' when one exists
// inside the window.
std::string clipBack(std::string_view text, std::size_t cap)
{
    if (text.size() <= cap) {
        return std::string(text);
    }
    std::size_t end = cap;
    auto nl = cap == 0 ? std::string_view::npos : text.rfind('\n', cap - 1);
    if (nl != std::string_view::npos) {
        end = nl + 1;
    } else {
        while (end > 0 && isContinuationByte(text[end])) {
            --end;
        }
    }
    return std::string(text.substr(0, end));
}

std::string renderCursor(Position p)
{
    return std::to_string(p.line) + ":" + std::to_string(p.column);
}

constexpr std::array<std::pair<std::string_view, Placeholder>, 8> kPlaceholders{{
    {"prefix", Placeholder::Prefix},
    {"suffix", Placeholder::Suffix},
    {"selection", Placeholder::Selection},
    {"file_path", Placeholder::FilePath},
    {"language", Placeholder::Language},
    {"diagnostics", Placeholder::Diagnostics},
    {"cursor", Placeholder::Cursor},
    {"instruction", Placeholder::Instruction},
}};

}  // namespace

std::string renderDiagnostics(const std::vector<Diagnostic>& diagnostics)
{
    std::string out;
    for (const auto& d : diagnostics) {
        if (!out.empty()) {
            out += '\n';
        }
        out += severityName(d.severity);
        out += ' ';
        out += renderCursor(d.range.start);
        out += ' ';
        out += d.message;
    }
    return out;
}

PromptContext assembleContext(const Document& doc, Position cursor, const std::optional<Range>& selection,
                              const ContextCaps& caps)
{
    std::size_t offset = resolveOffset(doc, cursor);
    std::string_view content = doc.content;

    PromptContext ctx;
    ctx.relativePath = doc.id.str();
    ctx.languageId = doc.languageId;
    ctx.cursor = cursor;

    auto before = content.substr(0, offset);
    auto after = content.substr(offset);
    ctx.prefix = clipFront(before, caps.prefixBytes);
    ctx.suffix = clipBack(after, caps.suffixBytes);
    ctx.truncated = ctx.prefix.size() != before.size() || ctx.suffix.size() != after.size();

    if (selection) {
        if (!doc.isValid(*selection)) {
            throw Error(ErrorCode::InvalidPosition, "selection outside document");
        }
        std::size_t begin = resolveOffset(doc, selection->start);
        std::size_t end = resolveOffset(doc, selection->end);
        auto text = content.substr(begin, end - begin);
        Selection sel{*selection, clipBack(text, caps.selectionBytes)};
        if (sel.text.size() != text.size()) {
            sel.text += kTruncationMarker;
            ctx.truncated = true;
        }
        ctx.selection = std::move(sel);
    }

    ctx.diagnosticsRendered = renderDiagnostics(doc.diagnostics);
    return ctx;
}

Template::Template(std::string name, std::string body) : name_(std::move(name)), body_(std::move(body))
{
    std::size_t pos = 0;
    std::string literal;
    while (pos < body_.size()) {
        auto open = body_.find("{{", pos);
        if (open == std::string::npos) {
            literal += body_.substr(pos);
            break;
        }
        literal += body_.substr(pos, open - pos);
        auto close = body_.find("}}", open + 2);
        if (close == std::string::npos) {
            throw Error(ErrorCode::UnknownPlaceholder, "unterminated placeholder in template " + name_,
                        {{"template", name_}, {"offset", open}});
        }
        std::string_view key = std::string_view(body_).substr(open + 2, close - open - 2);
        std::optional<Placeholder> slot;
        for (const auto& [text, p] : kPlaceholders) {
            if (text == key) {
                slot = p;
            }
        }
        if (!slot) {
            throw Error(ErrorCode::UnknownPlaceholder,
                        "unknown placeholder {{" + std::string(key) + "}} in template " + name_,
                        {{"template", name_}, {"placeholder", std::string(key)}});
        }
        pieces_.push_back({std::move(literal), slot});
        literal.clear();
        pos = close + 2;
    }
    if (!literal.empty()) {
        pieces_.push_back({std::move(literal), std::nullopt});
    }
}

bool Template::uses(Placeholder p) const
{
    for (const auto& piece : pieces_) {
        if (piece.slot == p) {
            return true;
        }
    }
    return false;
}

std::string Template::render(const PromptContext& ctx, const std::optional<std::string>& instruction) const
{
    if (uses(Placeholder::Instruction) && !instruction) {
        throw Error(ErrorCode::MissingInstruction, "template " + name_ + " needs an instruction",
                    {{"template", name_}});
    }
    std::string out;
    for (const auto& piece : pieces_) {
        out += piece.literal;
        if (!piece.slot) {
            continue;
        }
        switch (*piece.slot) {
        case Placeholder::Prefix: out += ctx.prefix; break;
        case Placeholder::Suffix: out += ctx.suffix; break;
        case Placeholder::Selection:
            if (ctx.selection) {
                out += ctx.selection->text;
            }
            break;
        case Placeholder::FilePath: out += ctx.relativePath; break;
        case Placeholder::Language: out += ctx.languageId; break;
        case Placeholder::Diagnostics: out += ctx.diagnosticsRendered; break;
        case Placeholder::Cursor: out += renderCursor(ctx.cursor); break;
        case Placeholder::Instruction: out += *instruction; break;
        }
    }
    return out;
}

std::string renderTemplate(const Template& t, const PromptContext& ctx, const std::optional<std::string>& instruction)
{
    return t.render(ctx, instruction);
}

std::map<std::string, Template> defaultTemplates()
{
    const std::string codeTail =
        "Code:\n```{{language}}\n{{selection}}\n```\n"
        "Diagnostics:\n{{diagnostics}}\n";
    const std::string header =
        "You are editing {{file_path}} ({{language}}), cursor at {{cursor}}.\n"
        "Reply with the complete replacement code inside a single fenced code block.\n\n";

    std::map<std::string, Template> out;
    auto add = [&out](std::string name, std::string body) {
        Template t(name, std::move(body));
        out.emplace(std::move(name), std::move(t));
    };
    add("chat_attachment",
        "File: {{file_path}} ({{language}})\nCursor: {{cursor}}\n"
        "Selected code:\n```{{language}}\n{{selection}}\n```\n"
        "Diagnostics:\n{{diagnostics}}\n");
    add("prompt_to_code", header + "Instruction: {{instruction}}\n\n" + codeTail);
    add("split_function",
        header + "Instruction: split this function into smaller functions. {{instruction}}\n\n" + codeTail);
    add("add_documentation",
        header + "Instruction: add documentation comments. {{instruction}}\n\n" + codeTail);
    add("fix_bugs", header + "Instruction: fix the reported errors and warnings. {{instruction}}\n\n" + codeTail);
    add("localize_strings",
        header + "Instruction: translate the localizable strings. {{instruction}}\n\n" + codeTail);
    return out;
}

}  // namespace assist
