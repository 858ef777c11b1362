#include "assist/config.hpp"

#include <cstdlib>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include "assist/error.hpp"

namespace assist {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(int line, const std::string& field, const std::string& message)
{
    std::string where = line > 0 ? "line " + std::to_string(line) : "config";
    if (!field.empty()) {
        where += ", field '" + field + "'";
    }
    json data{{"line", line}};
    if (!field.empty()) {
        data["field"] = field;
    }
    throw Error(ErrorCode::ConfigInvalid, where + ": " + message, std::move(data));
}

bool isBareKeyChar(char c)
{
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

void appendUtf8(std::string& out, unsigned long cp)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

/// Character-level TOML reader over the whole text; tracks the line number.
class TomlReader {
public:
    TomlReader(std::string_view text, std::map<std::string, int>* lines) : s_(text), lines_(lines) {}

    json parse()
    {
        json root = json::object();
        json* table = &root;
        std::string tablePath;
        std::set<std::string> definedTables;
        while (skipBlankAndComments(), pos_ < s_.size()) {
            if (peek() == '[') {
                int headerLine = line_;
                bool arrayTable = s_.substr(pos_).starts_with("[[");
                pos_ += arrayTable ? 2 : 1;
                auto keys = parseKeyPath();
                skipInline();
                if (!consume(arrayTable ? "]]" : "]")) {
                    fail(line_, "", "unterminated table header");
                }
                endOfLine();
                table = &root;
                tablePath.clear();
                for (std::size_t i = 0; i < keys.size(); ++i) {
                    bool last = i + 1 == keys.size();
                    const auto& k = keys[i];
                    if (!tablePath.empty()) {
                        tablePath += '.';
                    }
                    tablePath += k;
                    json& next = (*table)[k];
                    if (last && arrayTable) {
                        if (next.is_null()) {
                            next = json::array();
                        }
                        if (!next.is_array()) {
                            fail(headerLine, tablePath, "redefined as an array of tables");
                        }
                        next.push_back(json::object());
                        tablePath += "[" + std::to_string(next.size() - 1) + "]";
                        table = &next.back();
                    } else {
                        if (next.is_null()) {
                            next = json::object();
                        }
                        if (next.is_array() && !next.empty() && next.back().is_object()) {
                            tablePath += "[" + std::to_string(next.size() - 1) + "]";
                            table = &next.back();
                            continue;
                        }
                        if (!next.is_object()) {
                            fail(headerLine, tablePath, "key is not a table");
                        }
                        table = &next;
                    }
                }
                if (!arrayTable && !definedTables.insert(tablePath).second) {
                    fail(headerLine, tablePath, "table defined twice");
                }
                if (lines_) {
                    (*lines_)[tablePath] = headerLine;
                }
                continue;
            }
            int keyLine = line_;
            auto keys = parseKeyPath();
            skipInline();
            if (!consume("=")) {
                fail(line_, joinKeys(tablePath, keys), "expected '='");
            }
            skipInline();
            json value = parseValue();
            endOfLine();
            json* target = table;
            for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
                json& next = (*target)[keys[i]];
                if (next.is_null()) {
                    next = json::object();
                }
                if (!next.is_object()) {
                    fail(keyLine, joinKeys(tablePath, keys), "key is not a table");
                }
                target = &next;
            }
            auto path = joinKeys(tablePath, keys);
            if (target->contains(keys.back())) {
                fail(keyLine, path, "duplicate key");
            }
            (*target)[keys.back()] = std::move(value);
            if (lines_) {
                (*lines_)[path] = keyLine;
            }
        }
        return root;
    }

private:
    static std::string joinKeys(const std::string& prefix, const std::vector<std::string>& keys)
    {
        std::string out = prefix;
        for (const auto& k : keys) {
            if (!out.empty()) {
                out += '.';
            }
            out += k;
        }
        return out;
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    bool consume(std::string_view lit)
    {
        if (s_.substr(pos_).starts_with(lit)) {
            pos_ += lit.size();
            return true;
        }
        return false;
    }

    char advance()
    {
        char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
        }
        return c;
    }

    void skipInline()
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) {
            ++pos_;
        }
    }

    void skipComment()
    {
        if (peek() == '#') {
            while (pos_ < s_.size() && s_[pos_] != '\n') {
                ++pos_;
            }
        }
    }

    void skipBlankAndComments()
    {
        for (;;) {
            skipInline();
            skipComment();
            if (peek() == '\n') {
                advance();
            } else if (peek() == '\r' && s_.substr(pos_).starts_with("\r\n")) {
                ++pos_;
                advance();
            } else {
                return;
            }
        }
    }

    void endOfLine()
    {
        skipInline();
        skipComment();
        if (pos_ >= s_.size()) {
            return;
        }
        if (peek() == '\r') {
            ++pos_;
        }
        if (peek() != '\n') {
            fail(line_, "", "unexpected text after value");
        }
        advance();
    }

    std::string parseKey()
    {
        skipInline();
        if (peek() == '"' || peek() == '\'') {
            return parseSingleLineString();
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && isBareKeyChar(s_[pos_])) {
            ++pos_;
        }
        if (start == pos_) {
            fail(line_, "", "expected a key");
        }
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> parseKeyPath()
    {
        std::vector<std::string> keys{parseKey()};
        for (;;) {
            skipInline();
            if (peek() != '.') {
                return keys;
            }
            ++pos_;
            keys.push_back(parseKey());
        }
    }

    std::string parseEscape()
    {
        char c = peek();
        if (pos_ >= s_.size()) {
            fail(line_, "", "unterminated escape");
        }
        ++pos_;
        switch (c) {
        case 'n': return "\n";
        case 't': return "\t";
        case 'r': return "\r";
        case 'b': return "\b";
        case 'f': return "\f";
        case '"': return "\"";
        case '\\': return "\\";
        case 'u':
        case 'U': {
            std::size_t n = c == 'u' ? 4 : 8;
            if (pos_ + n > s_.size()) {
                fail(line_, "", "short unicode escape");
            }
            unsigned long cp = 0;
            for (std::size_t i = 0; i < n; ++i) {
                char h = s_[pos_ + i];
                cp <<= 4;
                if (h >= '0' && h <= '9') cp |= static_cast<unsigned long>(h - '0');
                else if (h >= 'a' && h <= 'f') cp |= static_cast<unsigned long>(h - 'a' + 10);
                else if (h >= 'A' && h <= 'F') cp |= static_cast<unsigned long>(h - 'A' + 10);
                else fail(line_, "", "bad unicode escape");
            }
            pos_ += n;
            if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
                fail(line_, "", "unicode escape out of range");
            }
            std::string out;
            appendUtf8(out, cp);
            return out;
        }
        default: fail(line_, "", std::string("unknown escape \\") + c);
        }
    }

    std::string parseSingleLineString()
    {
        char quote = advance();
        std::string out;
        for (;;) {
            if (pos_ >= s_.size() || peek() == '\n') {
                fail(line_, "", "unterminated string");
            }
            char c = advance();
            if (c == quote) {
                return out;
            }
            if (c == '\\' && quote == '"') {
                out += parseEscape();
            } else {
                out += c;
            }
        }
    }

    std::string parseMultiLineString(char quote)
    {
        pos_ += 3;
        // A newline right after the opening delimiter is trimmed.
        if (consume("\r\n")) {
            ++line_;
        } else if (peek() == '\n') {
            advance();
        }
        const std::string close(3, quote);
        std::string out;
        for (;;) {
            if (pos_ >= s_.size()) {
                fail(line_, "", "unterminated multi-line string");
            }
            if (s_.substr(pos_).starts_with(close)) {
                pos_ += 3;
                // Up to two quotes directly before the closing delimiter belong to the string.
                for (int extra = 0; extra < 2 && peek() == quote; ++extra) {
                    out += quote;
                    ++pos_;
                }
                return out;
            }
            char c = advance();
            if (c == '\\' && quote == '"') {
                // Line-ending backslash trims the break and following whitespace.
                std::size_t probe = pos_;
                while (probe < s_.size() && (s_[probe] == ' ' || s_[probe] == '\t' || s_[probe] == '\r')) {
                    ++probe;
                }
                if (probe < s_.size() && s_[probe] == '\n') {
                    pos_ = probe;
                    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' ||
                                                s_[pos_] == '\r')) {
                        advance();
                    }
                    continue;
                }
                out += parseEscape();
            } else {
                out += c;
            }
        }
    }

    json parseValue()
    {
        char c = peek();
        if (c == '"' || c == '\'') {
            if (s_.substr(pos_).starts_with(std::string(3, c))) {
                return parseMultiLineString(c);
            }
            return parseSingleLineString();
        }
        if (c == '[') {
            return parseArray();
        }
        if (consume("true")) return true;
        if (consume("false")) return false;
        return parseNumber();
    }

    json parseArray()
    {
        ++pos_;
        json arr = json::array();
        for (;;) {
            skipBlankAndComments();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            json v = parseValue();
            if (!arr.empty() && arr.front().type() != v.type() &&
                !(arr.front().is_number() && v.is_number())) {
                fail(line_, "", "mixed value types in array");
            }
            arr.push_back(std::move(v));
            skipBlankAndComments();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skipBlankAndComments();
            if (peek() != ']') {
                fail(line_, "", "expected ',' or ']' in array");
            }
        }
    }

    json parseNumber()
    {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (isBareKeyChar(s_[pos_]) || s_[pos_] == '+' || s_[pos_] == '.')) {
            ++pos_;
        }
        std::string raw;
        for (char ch : s_.substr(start, pos_ - start)) {
            if (ch != '_') {
                raw += ch;
            }
        }
        if (raw.empty()) {
            fail(line_, "", "expected a value");
        }
        bool isFloat = raw.find_first_of(".eE") != std::string::npos && raw.find("0x") != 0;
        try {
            std::size_t used = 0;
            if (isFloat) {
                double d = std::stod(raw, &used);
                if (used == raw.size()) return d;
            } else {
                long long v = std::stoll(raw, &used, 10);
                if (used == raw.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail(line_, "", "invalid value '" + raw + "'");
    }

    std::string_view s_;
    std::map<std::string, int>* lines_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

/// Typed access to one table of the parsed tree with line-aware errors.
class TableReader {
public:
    TableReader(const json& table, std::string path, const std::map<std::string, int>& lines)
        : t_(table), path_(std::move(path)), lines_(lines)
    {
        if (!t_.is_object()) {
            fail(lineOf(""), path_, "expected a table");
        }
    }

    int lineOf(const std::string& key) const
    {
        auto full = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
        auto it = lines_.find(full);
        return it == lines_.end() ? 0 : it->second;
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const
    {
        used_.insert(key);
        return t_.contains(key);
    }

    std::optional<std::string> str(const std::string& key) const
    {
        if (!has(key)) return std::nullopt;
        const auto& v = t_[key];
        if (!v.is_string()) fail(lineOf(key), field(key), "expected a string");
        return v.get<std::string>();
    }

    std::optional<std::int64_t> integer(const std::string& key, std::int64_t min) const
    {
        if (!has(key)) return std::nullopt;
        const auto& v = t_[key];
        if (!v.is_number_integer()) fail(lineOf(key), field(key), "expected an integer");
        auto n = v.get<std::int64_t>();
        if (n < min) fail(lineOf(key), field(key), "must be >= " + std::to_string(min));
        return n;
    }

    std::optional<bool> boolean(const std::string& key) const
    {
        if (!has(key)) return std::nullopt;
        const auto& v = t_[key];
        if (!v.is_boolean()) fail(lineOf(key), field(key), "expected true or false");
        return v.get<bool>();
    }

    /// Rejects keys nobody asked for.
    void finish() const
    {
        for (const auto& [key, _] : t_.items()) {
            if (!used_.contains(key)) {
                fail(lineOf(key), field(key), "unknown key");
            }
        }
    }

private:
    const json& t_;
    std::string path_;
    const std::map<std::string, int>& lines_;
    mutable std::set<std::string> used_;
};

const std::set<std::string>& secretLikeKeys()
{
    static const std::set<std::string> keys{"api_key", "apikey", "secret", "token", "password", "credential"};
    return keys;
}

}  // namespace

nlohmann::json parseToml(std::string_view text, std::map<std::string, int>* lines)
{
    return TomlReader(text, lines).parse();
}

Config defaultConfig()
{
    Config cfg;
    ProviderConfig mock;
    mock.id = "mock";
    mock.kind = ProviderKind::Mock;
    cfg.providers.push_back(mock);
    cfg.templates = defaultTemplates();
    return cfg;
}

Config parseConfig(std::string_view text)
{
    std::map<std::string, int> lines;
    json root = parseToml(text, &lines);

    Config cfg;
    cfg.templates = defaultTemplates();
    TableReader top(root, "", lines);

    if (auto v = top.integer("debounce_ms", 0)) cfg.debounce = std::chrono::milliseconds(*v);
    if (auto v = top.integer("prefetch_capacity", 1)) cfg.prefetchCapacity = static_cast<std::size_t>(*v);
    if (auto v = top.integer("max_results", 1)) {
        if (*v > 10) fail(top.lineOf("max_results"), "max_results", "must be <= 10");
        cfg.maxResults = static_cast<int>(*v);
    }
    if (auto v = top.integer("history_cap", 2)) cfg.historyCap = static_cast<std::size_t>(*v);
    if (auto v = top.str("state_dir")) cfg.stateDir = *v;
    if (auto v = top.str("workspace_root")) cfg.workspaceRoot = *v;

    if (top.has("caps")) {
        TableReader caps(root["caps"], "caps", lines);
        if (auto v = caps.integer("prefix_bytes", 1)) cfg.caps.prefixBytes = static_cast<std::size_t>(*v);
        if (auto v = caps.integer("suffix_bytes", 1)) cfg.caps.suffixBytes = static_cast<std::size_t>(*v);
        if (auto v = caps.integer("selection_bytes", 1)) cfg.caps.selectionBytes = static_cast<std::size_t>(*v);
        caps.finish();
    }

    if (top.has("providers")) {
        const auto& list = root["providers"];
        if (!list.is_array()) {
            fail(top.lineOf("providers"), "providers", "expected [[providers]] tables");
        }
        std::set<std::string> ids;
        for (std::size_t i = 0; i < list.size(); ++i) {
            std::string path = "providers[" + std::to_string(i) + "]";
            TableReader p(list[i], path, lines);
            for (const auto& [key, _] : list[i].items()) {
                if (secretLikeKeys().contains(key)) {
                    fail(p.lineOf(key), p.field(key),
                         "secrets may not be stored in the config; name an environment variable in credential_ref");
                }
            }
            ProviderConfig pc;
            auto id = p.str("id");
            if (!id || id->empty()) fail(p.lineOf(""), p.field("id"), "required");
            pc.id = *id;
            if (!ids.insert(pc.id).second) fail(p.lineOf("id"), p.field("id"), "duplicate provider id '" + pc.id + "'");
            auto kind = p.str("kind");
            if (!kind) fail(p.lineOf(""), p.field("kind"), "required");
            auto parsed = parseProviderKind(*kind);
            if (!parsed) fail(p.lineOf("kind"), p.field("kind"), "expected completion, chat or mock");
            pc.kind = *parsed;
            if (auto v = p.str("endpoint")) pc.endpoint = *v;
            if (pc.kind != ProviderKind::Mock) {
                if (pc.endpoint.find("://") == std::string::npos) {
                    fail(p.lineOf("endpoint"), p.field("endpoint"), "an absolute http(s) URL is required");
                }
            }
            if (auto v = p.str("credential_ref")) pc.credentialRef = *v;
            if (auto v = p.str("model")) pc.modelName = *v;
            if (auto v = p.integer("timeout_ms", 1)) pc.timeoutMs = *v;
            if (auto v = p.integer("priority", std::numeric_limits<std::int64_t>::min())) pc.priority = *v;
            if (auto v = p.integer("mock_latency_ms", 0)) pc.mockLatencyMs = *v;
            if (auto v = p.boolean("mock_synthetic_fallback")) pc.mockSyntheticFallback = *v;
            p.finish();
            cfg.providers.push_back(std::move(pc));
        }
    }

    if (top.has("templates")) {
        TableReader(root["templates"], "templates", lines);
        for (const auto& [name, body] : root["templates"].items()) {
            TableReader t(body, "templates." + name, lines);
            auto text = t.str("body");
            if (!text) fail(t.lineOf(""), t.field("body"), "required");
            try {
                cfg.templates.insert_or_assign(name, Template(name, *text));
            } catch (const Error& e) {
                fail(t.lineOf("body"), t.field("body"), e.what());
            }
            t.finish();
        }
    }

    if (top.has("comment_syntax")) {
        TableReader(root["comment_syntax"], "comment_syntax", lines);
        for (const auto& [lang, entry] : root["comment_syntax"].items()) {
            TableReader t(entry, "comment_syntax." + lang, lines);
            CommentSyntax syntax;
            syntax.languageId = lang;
            auto line = t.str("line");
            auto open = t.str("block_open");
            auto close = t.str("block_close");
            bool unsupported = t.boolean("unsupported").value_or(false);
            if (open.has_value() != close.has_value()) {
                fail(t.lineOf(open ? "block_open" : "block_close"), t.field(open ? "block_close" : "block_open"),
                     "block_open and block_close go together");
            }
            if (unsupported && (line || open)) {
                fail(t.lineOf("unsupported"), t.field("unsupported"), "conflicts with a declared comment form");
            }
            if (!unsupported && !line && !open) {
                fail(t.lineOf(""), t.field("line"), "declare line, block_open/block_close or unsupported = true");
            }
            if (line) syntax.linePrefix = *line;
            if (open) syntax.block = std::make_pair(*open, *close);
            t.finish();
            cfg.commentSyntaxOverrides.push_back(std::move(syntax));
        }
    }
    top.finish();

    if (cfg.providers.empty()) {
        fail(0, "providers", "at least one [[providers]] entry is required");
    }
    return cfg;
}

Config loadConfig(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::ConfigInvalid, "cannot read config file " + path.string(),
                    {{"line", 0}, {"path", path.string()}});
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseConfig(buf.str());
}

std::optional<std::filesystem::path> effectiveStateDir(const Config& cfg)
{
    if (const char* env = std::getenv("ASSIST_BRIDGE_STATE_DIR"); env && *env) {
        return std::filesystem::path(env);
    }
    return cfg.stateDir;
}

SyntaxRegistry buildSyntaxRegistry(const Config& cfg)
{
    SyntaxRegistry reg;
    for (const auto& s : cfg.commentSyntaxOverrides) {
        reg.override(s);
    }
    return reg;
}

}  // namespace assist
