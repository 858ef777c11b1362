#include "assist/chat.hpp"

#include <algorithm>
#include <fstream>

#include "assist/error.hpp"

namespace assist {

namespace fs = std::filesystem;

namespace {

std::string_view trimView(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool isFenceLine(std::string_view line)
{
    auto t = line.substr(std::min(line.find_first_not_of(' '), line.size()));
    return t.starts_with("```");
}

nlohmann::json attachmentRecord(const PromptContext& ctx)
{
    nlohmann::json j{{"type", "attachment"},
                     {"relativePath", ctx.relativePath},
                     {"languageId", ctx.languageId},
                     {"cursor", {{"line", ctx.cursor.line}, {"column", ctx.cursor.column}}},
                     {"diagnostics", ctx.diagnosticsRendered},
                     {"truncated", ctx.truncated}};
    if (ctx.selection) {
        j["selection"] = ctx.selection->text;
    }
    return j;
}

struct Turn {
    explicit Turn(std::function<void()> leave) : leave_(std::move(leave)) {}
    ~Turn() { leave_(); }
    Turn(const Turn&) = delete;
    Turn& operator=(const Turn&) = delete;

private:
    std::function<void()> leave_;
};

}  // namespace

std::optional<std::string> extractFirstCodeBlock(std::string_view reply)
{
    std::vector<std::string_view> lines;
    for (std::string_view rest = reply;;) {
        auto nl = rest.find('\n');
        auto line = rest.substr(0, nl);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (nl == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(nl + 1);
    }
    for (std::size_t open = 0; open < lines.size(); ++open) {
        if (!isFenceLine(lines[open])) {
            continue;
        }
        for (std::size_t close = open + 1; close < lines.size(); ++close) {
            if (trimView(lines[close]) == "```") {
                std::string out;
                for (std::size_t i = open + 1; i < close; ++i) {
                    if (i > open + 1) {
                        out += '\n';
                    }
                    out += lines[i];
                }
                return out;
            }
        }
        return std::nullopt;
    }
    return std::nullopt;
}

PluginRegistry::PluginRegistry()
{
    add("echo", [](std::string_view arg) { return std::string(arg); });
}

void PluginRegistry::add(std::string name, PluginHandler handler)
{
    handlers_.insert_or_assign(std::move(name), std::move(handler));
}

const PluginHandler* PluginRegistry::find(std::string_view name) const
{
    auto it = handlers_.find(name);
    return it == handlers_.end() ? nullptr : &it->second;
}

std::vector<std::string> PluginRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : handlers_) {
        out.push_back(name);
    }
    return out;
}

std::int64_t systemNowMs()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

ChatService::ChatService(Workspace& workspace, const ProviderRegistry& providers,
                         std::map<std::string, Template> templates, ChatOptions options, WallClock clock)
    : workspace_(workspace),
      providers_(providers),
      templates_(std::move(templates)),
      options_(std::move(options)),
      clock_(std::move(clock))
{
    for (const char* required : {"chat_attachment", "prompt_to_code"}) {
        if (!templates_.contains(required)) {
            throw Error(ErrorCode::InvalidParams, std::string("missing template ") + required,
                        {{"template", required}});
        }
    }
    if (options_.historyCap < 2) {
        throw Error(ErrorCode::InvalidParams, "history cap must be at least 2", {{"historyCap", options_.historyCap}});
    }
    if (options_.stateDir) {
        fs::create_directories(*options_.stateDir / "conversations");
        // Continue numbering after logs left by earlier runs.
        for (const auto& entry : fs::directory_iterator(*options_.stateDir / "conversations")) {
            auto stem = entry.path().stem().string();
            if (entry.path().extension() == ".jsonl" && stem.size() > 1 && stem[0] == 'c' &&
                std::all_of(stem.begin() + 1, stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                nextId_ = std::max<std::uint64_t>(nextId_, std::stoull(stem.substr(1)) + 1);
            }
        }
    }
}

std::optional<fs::path> ChatService::logPath(const std::string& id) const
{
    if (!options_.stateDir) {
        return std::nullopt;
    }
    return *options_.stateDir / "conversations" / (id + ".jsonl");
}

void ChatService::append(const std::string& id, const nlohmann::json& record) const
{
    auto path = logPath(id);
    if (!path) {
        return;
    }
    std::lock_guard lock(logMu_);
    std::ofstream out(*path, std::ios::app | std::ios::binary);
    out << record.dump() << '\n';
    if (!out) {
        throw Error(ErrorCode::InternalError, "cannot write conversation log", {{"path", path->string()}});
    }
}

std::uint64_t ChatService::Slot::enter(const CancelToken& cancel)
{
    std::unique_lock lock(mu);
    auto ticket = nextTicket++;
    while (serving != ticket) {
        if (cancel.cancelled()) {
            abandoned.insert(ticket);
            cancel.throwIfCancelled();
        }
        cv.wait_for(lock, std::chrono::milliseconds(20));
    }
    return ticket;
}

void ChatService::Slot::leave()
{
    std::lock_guard lock(mu);
    ++serving;
    while (abandoned.erase(serving) > 0) {
        ++serving;
    }
    cv.notify_all();
}

std::shared_ptr<ChatService::Slot> ChatService::slot(const std::string& id) const
{
    std::lock_guard lock(mu_);
    auto it = conversations_.find(id);
    if (it == conversations_.end()) {
        throw Error(ErrorCode::ConversationNotFound, "unknown conversation " + id, {{"conversationId", id}});
    }
    return it->second;
}

std::shared_ptr<Provider> ChatService::requireChatProvider() const
{
    auto p = providers_.chatProvider();
    if (!p) {
        throw Error(ErrorCode::NoProvider, "no chat provider is configured");
    }
    return p;
}

Conversation ChatService::newConversation(const std::optional<std::string>& systemPrompt)
{
    auto s = std::make_shared<Slot>();
    {
        std::lock_guard lock(mu_);
        s->conv.id = "c" + std::to_string(nextId_++);
        s->conv.createdAt = clock_();
        if (systemPrompt && !systemPrompt->empty()) {
            s->conv.messages.push_back({ChatRole::System, *systemPrompt});
        }
        conversations_.emplace(s->conv.id, s);
    }
    append(s->conv.id, {{"type", "created"}, {"id", s->conv.id}, {"createdAt", s->conv.createdAt}});
    if (!s->conv.messages.empty()) {
        append(s->conv.id, {{"type", "message"}, {"role", "system"}, {"content", *systemPrompt}, {"at", s->conv.createdAt}});
    }
    return s->conv;
}

Conversation ChatService::conversation(const std::string& id) const
{
    auto s = slot(id);
    std::lock_guard lock(s->mu);
    return s->conv;
}

std::size_t ChatService::evict(Conversation& conv) const
{
    std::size_t first = (!conv.messages.empty() && conv.messages.front().role == ChatRole::System) ? 1 : 0;
    std::size_t dropped = 0;
    while (conv.messages.size() > options_.historyCap && conv.messages.size() > first + 1) {
        conv.messages.erase(conv.messages.begin() + static_cast<std::ptrdiff_t>(first));
        ++dropped;
    }
    // Never start the visible history with an orphaned reply.
    while (conv.messages.size() > first + 1 && conv.messages[first].role == ChatRole::Assistant) {
        conv.messages.erase(conv.messages.begin() + static_cast<std::ptrdiff_t>(first));
        ++dropped;
    }
    return dropped;
}

ChatMessage ChatService::sendMessage(const std::string& conversationId, const std::string& text,
                                     const std::optional<PromptContext>& attachment, const ChunkSink& onChunk,
                                     const CancelToken& cancel)
{
    if (trimView(text).empty()) {
        throw Error(ErrorCode::InvalidParams, "message text must not be empty");
    }
    auto s = slot(conversationId);

    std::string content = text;
    if (attachment) {
        content += "\n\n" + templates_.at("chat_attachment").render(*attachment);
    }
    if (content.size() > options_.maxMessageBytes) {
        throw Error(ErrorCode::ConversationTooLong, "message exceeds the per-message byte cap",
                    {{"bytes", content.size()}, {"cap", options_.maxMessageBytes}});
    }

    s->enter(cancel);
    Turn turn([&s] { s->leave(); });
    auto logEviction = [&](std::size_t dropped) {
        if (dropped > 0) {
            append(conversationId, {{"type", "evicted"}, {"count", dropped}});
        }
    };

    // "/name arg" goes to a plugin when one is registered under that name.
    if (text.starts_with('/') && !attachment) {
        auto body = std::string_view(text).substr(1);
        auto sp = body.find(' ');
        auto name = body.substr(0, sp);
        auto arg = sp == std::string_view::npos ? std::string_view{} : trimView(body.substr(sp + 1));
        if (const auto* handler = plugins_.find(name)) {
            std::string reply = (*handler)(arg);
            if (reply.empty()) {
                reply = "(no output)";
            }
            ChatMessage user{ChatRole::User, text};
            ChatMessage assistant{ChatRole::Assistant, reply};
            auto now = clock_();
            std::size_t dropped = 0;
            {
                std::lock_guard lock(s->mu);
                s->conv.messages.push_back(user);
                s->conv.messages.push_back(assistant);
                dropped = evict(s->conv);
            }
            append(conversationId, {{"type", "message"}, {"role", "user"}, {"content", text}, {"at", now}});
            append(conversationId,
                   {{"type", "message"}, {"role", "assistant"}, {"content", reply}, {"at", now}, {"plugin", name}});
            logEviction(dropped);
            if (onChunk) {
                onChunk(reply);
            }
            return assistant;
        }
    }

    auto provider = requireChatProvider();
    ChatRequest req;
    req.temperature = options_.temperature;
    req.modelName = provider->config().modelName;
    std::size_t dropped = 0;
    {
        std::lock_guard lock(s->mu);
        s->conv.messages.push_back({ChatRole::User, content});
        if (attachment) {
            s->conv.attachments.push_back(*attachment);
        }
        dropped = evict(s->conv);
        req.messages = s->conv.messages;
    }
    append(conversationId, {{"type", "message"}, {"role", "user"}, {"content", content}, {"at", clock_()}});
    if (attachment) {
        append(conversationId, attachmentRecord(*attachment));
    }
    logEviction(dropped);

    ChatMessage reply = provider->chatComplete(req, onChunk, cancel);
    if (reply.content.empty()) {
        throw Error(ErrorCode::ProtocolError, "provider returned an empty reply", {{"provider", provider->id()}});
    }
    reply.role = ChatRole::Assistant;
    {
        std::lock_guard lock(s->mu);
        s->conv.messages.push_back(reply);
        dropped = evict(s->conv);
    }
    append(conversationId, {{"type", "message"}, {"role", "assistant"}, {"content", reply.content}, {"at", clock_()}});
    logEviction(dropped);
    return reply;
}

Patch ChatService::promptToCode(const DocumentId& uri, const Range& range, const std::string& instruction,
                                const CancelToken& cancel, const ChunkSink& onChunk, const std::string& templateName)
{
    if (trimView(instruction).empty()) {
        throw Error(ErrorCode::InvalidParams, "instruction must not be empty");
    }
    auto tmpl = templates_.find(templateName);
    if (tmpl == templates_.end()) {
        throw Error(ErrorCode::InvalidParams, "unknown template " + templateName, {{"template", templateName}});
    }
    auto doc = workspace_.snapshot(uri);
    if (!doc.isValid(range)) {
        throw Error(ErrorCode::RangeOutOfBounds, "range outside document",
                    {{"start", {{"line", range.start.line}, {"column", range.start.column}}},
                     {"end", {{"line", range.end.line}, {"column", range.end.column}}}});
    }
    auto ctx = assembleContext(doc, range.start, range, options_.caps);
    std::string prompt = tmpl->second.render(ctx, instruction);

    auto provider = requireChatProvider();
    ChatRequest req{{{ChatRole::User, prompt}}, options_.temperature, provider->config().modelName};
    auto reply = provider->chatComplete(req, onChunk, cancel);

    auto block = extractFirstCodeBlock(reply.content);
    if (!block) {
        throw Error(ErrorCode::NoCodeBlockInReply, "the reply contains no fenced code block",
                    {{"reply", reply.content.substr(0, 200)}});
    }
    // Match the replaced span's trailing line break.
    std::size_t from = resolveOffset(doc, range.start);
    std::size_t to = resolveOffset(doc, range.end);
    bool spanEndsWithNewline = to > from && doc.content[to - 1] == '\n';
    std::string newText = std::move(*block);
    while (!newText.empty() && newText.back() == '\n') {
        newText.pop_back();
    }
    if (spanEndsWithNewline) {
        newText += '\n';
    }
    return Patch{doc.id, doc.version, {TextEdit{range, std::move(newText)}}};
}

Document ChatService::applyPatch(const DocumentId& uri, const Patch& patch)
{
    if (!(patch.documentId == uri)) {
        throw Error(ErrorCode::InvalidParams, "patch targets a different document",
                    {{"uri", uri.str()}, {"patchDocument", patch.documentId.str()}});
    }
    return workspace_.applyEdits(uri, patch.baseVersion, patch.edits);
}

Conversation ChatService::readLog(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::ConversationNotFound, "no conversation log at " + file.string());
    }
    Conversation conv;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::ParseError, "corrupt conversation log", {{"line", lineNo}});
        }
        auto type = j.value("type", "");
        if (type == "created") {
            conv.id = j.value("id", "");
            conv.createdAt = j.value("createdAt", std::int64_t{0});
        } else if (type == "message") {
            auto role = parseChatRole(j.value("role", ""));
            if (!role) {
                throw Error(ErrorCode::ParseError, "corrupt conversation log", {{"line", lineNo}});
            }
            conv.messages.push_back({*role, j.value("content", "")});
        } else if (type == "attachment") {
            PromptContext ctx;
            ctx.relativePath = j.value("relativePath", "");
            ctx.languageId = j.value("languageId", "");
            ctx.cursor = {j["cursor"].value("line", std::size_t{0}), j["cursor"].value("column", std::size_t{0})};
            ctx.diagnosticsRendered = j.value("diagnostics", "");
            ctx.truncated = j.value("truncated", false);
            if (j.contains("selection")) {
                ctx.selection = Selection{{}, j["selection"].get<std::string>()};
            }
            conv.attachments.push_back(std::move(ctx));
        } else if (type == "evicted") {
            std::size_t first =
                (!conv.messages.empty() && conv.messages.front().role == ChatRole::System) ? 1 : 0;
            auto n = std::min(j.value("count", std::size_t{0}), conv.messages.size() - first);
            conv.messages.erase(conv.messages.begin() + static_cast<std::ptrdiff_t>(first),
                                conv.messages.begin() + static_cast<std::ptrdiff_t>(first + n));
        }
    }
    return conv;
}

}  // namespace assist
