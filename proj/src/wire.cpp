#include "assist/wire.hpp"

#include <thread>

#include <spdlog/spdlog.h>

#include "assist/codec.hpp"
#include "assist/context.hpp"

namespace assist {

namespace {

using json = nlohmann::json;

PresentationMode modeFrom(const json& params)
{
    auto name = optionalString(params, "mode");
    if (!name) {
        return PresentationMode::NearbyTextCursor;
    }
    auto mode = parsePresentationMode(*name);
    if (!mode) {
        throw Error(ErrorCode::InvalidParams, "mode: expected nearbyTextCursor or floatingWidget", {{"field", "mode"}});
    }
    return *mode;
}

DocumentId uriFrom(Broker& broker, const json& params)
{
    return broker.workspace().makeId(requiredString(params, "uri"));
}

json sessionResult(const SuggestionSession& s)
{
    return toJson(s);
}

using Handler = json (*)(Broker&, const json&, CallContext&);

json workspaceOpen(Broker& b, const json& p, CallContext&)
{
    auto uri = uriFrom(b, p);
    auto lang = requiredString(p, "languageId");
    if (lang.empty()) {
        throw Error(ErrorCode::InvalidParams, "languageId: must not be empty", {{"field", "languageId"}});
    }
    return toJson(b.workspace().openDocument(uri, lang, requiredString(p, "content")));
}

json workspaceEdit(Broker& b, const json& p, CallContext& ctx)
{
    auto uri = uriFrom(b, p);
    auto expected = requiredInt(p, "expectedVersion");
    auto range = rangeFrom(required(p, "range"), "range");
    auto text = requiredString(p, "newText");
    ctx.cancel.throwIfCancelled();
    return toJson(b.workspace().applyEdit(uri, expected, range, text));
}

json workspaceDiagnostics(Broker& b, const json& p, CallContext&)
{
    auto uri = uriFrom(b, p);
    const auto& list = required(p, "diagnostics");
    if (!list.is_array()) {
        throw Error(ErrorCode::InvalidParams, "diagnostics: expected an array", {{"field", "diagnostics"}});
    }
    std::vector<Diagnostic> diags;
    for (std::size_t i = 0; i < list.size(); ++i) {
        diags.push_back(diagnosticFrom(list[i], "diagnostics[" + std::to_string(i) + "]"));
    }
    return toJson(b.workspace().setDiagnostics(uri, std::move(diags)));
}

json suggestGet(Broker& b, const json& p, CallContext& ctx)
{
    auto uri = uriFrom(b, p);
    auto cursor = positionFrom(required(p, "cursor"), "cursor");
    auto mode = modeFrom(p);
    bool comment = optionalBool(p, "commentMode").value_or(false);
    std::optional<int> maxResults;
    if (auto n = optionalInt(p, "maxResults")) {
        if (*n < 1 || *n > 10) {
            throw Error(ErrorCode::InvalidParams, "maxResults: must be within [1, 10]", {{"field", "maxResults"}});
        }
        maxResults = static_cast<int>(*n);
    }
    auto session = b.suggest().getSuggestions(uri, cursor, mode, comment, ctx.cancel, maxResults);
    json out = sessionResult(session);
    if (session.commentBlock) {
        out["document"] = toJson(b.workspace().snapshot(uri));
    }
    return out;
}

json suggestNext(Broker& b, const json& p, CallContext&)
{
    return sessionResult(b.suggest().nextSuggestion(requiredString(p, "sessionId")));
}

json suggestPrevious(Broker& b, const json& p, CallContext&)
{
    return sessionResult(b.suggest().previousSuggestion(requiredString(p, "sessionId")));
}

json suggestAccept(Broker& b, const json& p, CallContext&)
{
    auto r = b.suggest().acceptSuggestion(requiredString(p, "sessionId"));
    return {{"document", toJson(r.document)}, {"appliedRange", toJson(r.appliedRange)}, {"session", toJson(r.session)}};
}

json suggestReject(Broker& b, const json& p, CallContext&)
{
    auto r = b.suggest().rejectSuggestion(requiredString(p, "sessionId"));
    return {{"document", toJson(r.document)}, {"session", toJson(r.session)}};
}

json suggestRealtime(Broker& b, const json& p, CallContext& ctx)
{
    auto uri = uriFrom(b, p);
    auto version = requiredInt(p, "version");
    auto cursor = positionFrom(required(p, "cursor"), "cursor");
    auto mode = modeFrom(p);
    auto notify = ctx.detachedNotifier();
    auto& engine = b.suggest();
    engine.scheduleRealtime(
        uri, version, cursor,
        [notify, &engine](const SuggestionSession& s) {
            // Stale-drop at the edge: only live sessions leave the daemon.
            if (engine.isLive(s.sessionId)) {
                notify("suggest/realtimeReady", toJson(s));
            }
        },
        mode);
    return {{"scheduled", true}};
}

json suggestPrefetch(Broker& b, const json& p, CallContext&)
{
    auto uri = uriFrom(b, p);
    auto cursor = positionFrom(required(p, "cursor"), "cursor");
    b.suggest().prefetchSuggestions(uri, cursor);
    return {{"scheduled", true}};
}

json suggestAnchor(Broker& b, const json& p, CallContext&)
{
    auto uri = uriFrom(b, p);
    auto cursor = positionFrom(required(p, "cursor"), "cursor");
    auto doc = b.workspace().snapshot(uri);
    return {{"anchor", toJson(computeAnchor(doc, cursor, modeFrom(p)))}};
}

json chatNew(Broker& b, const json& p, CallContext&)
{
    return toJson(b.chat().newConversation(optionalString(p, "system")));
}

json chatSend(Broker& b, const json& p, CallContext& ctx)
{
    auto id = requiredString(p, "conversationId");
    auto text = requiredString(p, "text");
    std::optional<PromptContext> attachment;
    if (p.contains("attach") && !p["attach"].is_null()) {
        const auto& a = p["attach"];
        auto uri = uriFrom(b, a);
        auto doc = b.workspace().snapshot(uri);
        std::optional<Range> selection;
        if (a.contains("selection") && !a["selection"].is_null()) {
            selection = rangeFrom(a["selection"], "attach.selection");
        }
        Position cursor = selection ? selection->start : Position{};
        if (a.contains("cursor") && !a["cursor"].is_null()) {
            cursor = positionFrom(a["cursor"], "attach.cursor");
        }
        attachment = assembleContext(doc, cursor, selection, b.caps());
    }
    std::size_t index = 0;
    auto reply = b.chat().sendMessage(
        id, text, attachment,
        [&](std::string_view chunk) {
            ctx.notify("chat/streamChunk", {{"requestId", ctx.requestId},
                                            {"conversationId", id},
                                            {"index", index++},
                                            {"chunk", std::string(chunk)}});
        },
        ctx.cancel);
    return {{"conversationId", id}, {"message", toJson(reply)}};
}

json chatPromptToCode(Broker& b, const json& p, CallContext& ctx)
{
    auto uri = uriFrom(b, p);
    auto range = rangeFrom(required(p, "range"), "range");
    auto instruction = requiredString(p, "instruction");
    auto tmpl = optionalString(p, "template").value_or("prompt_to_code");
    return toJson(b.chat().promptToCode(uri, range, instruction, ctx.cancel, {}, tmpl));
}

json chatApplyPatch(Broker& b, const json& p, CallContext& ctx)
{
    auto uri = uriFrom(b, p);
    auto patch = patchFrom(required(p, "patch"), "patch", b.workspace());
    ctx.cancel.throwIfCancelled();
    return toJson(b.chat().applyPatch(uri, patch));
}

json adminShutdown(Broker&, const json&, CallContext&)
{
    // Connection::run requests the shutdown once this answer is written.
    return {{"shuttingDown", true}};
}

const std::map<std::string, Handler, std::less<>>& handlers()
{
    static const std::map<std::string, Handler, std::less<>> table{
        {"workspace/open", workspaceOpen},
        {"workspace/edit", workspaceEdit},
        {"workspace/diagnostics", workspaceDiagnostics},
        {"suggest/get", suggestGet},
        {"suggest/next", suggestNext},
        {"suggest/previous", suggestPrevious},
        {"suggest/accept", suggestAccept},
        {"suggest/reject", suggestReject},
        {"suggest/realtime", suggestRealtime},
        {"suggest/prefetch", suggestPrefetch},
        {"suggest/anchor", suggestAnchor},
        {"chat/new", chatNew},
        {"chat/send", chatSend},
        {"chat/promptToCode", chatPromptToCode},
        {"chat/applyPatch", chatApplyPatch},
        {"admin/shutdown", adminShutdown},
    };
    return table;
}

std::optional<std::int64_t> validId(const json& id)
{
    if (id.is_number_unsigned()) {
        auto v = id.get<std::uint64_t>();
        if (v >= 1 && v <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
            return static_cast<std::int64_t>(v);
        }
        return std::nullopt;
    }
    if (id.is_number_integer() && id.get<std::int64_t>() >= 1) {
        return id.get<std::int64_t>();
    }
    return std::nullopt;
}

}  // namespace

const std::vector<std::string>& methodTable()
{
    static const std::vector<std::string> table{
        "workspace/open",    "workspace/edit",   "workspace/diagnostics", "suggest/get",
        "suggest/next",      "suggest/previous", "suggest/accept",        "suggest/reject",
        "suggest/realtime",  "suggest/prefetch", "suggest/anchor",        "chat/new",
        "chat/send",         "chat/promptToCode", "chat/applyPatch",      "admin/shutdown",
    };
    return table;
}

std::string responseFrame(std::int64_t id, const json& result)
{
    return json{{"id", id}, {"result", result}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string errorFrame(const json& id, ErrorCode code, const std::string& message, const json& data)
{
    json err{{"code", static_cast<int>(code)}, {"message", message}};
    if (!data.is_null()) {
        err["data"] = data;
    }
    return json{{"id", id}, {"error", std::move(err)}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string notificationFrame(std::string_view method, const json& params)
{
    return json{{"method", method}, {"params", params}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

json dispatch(Broker& broker, const std::string& method, const json& params, CallContext& ctx)
{
    auto it = handlers().find(method);
    if (it == handlers().end()) {
        throw Error(ErrorCode::MethodNotFound, "unknown method " + method, {{"method", method}});
    }
    ctx.cancel.throwIfCancelled();
    return it->second(broker, params, ctx);
}

void Connection::Outbound::send(const std::string& frame)
{
    std::lock_guard lock(mu);
    if (!open) {
        return;
    }
    try {
        sink(frame);
        if (counter) {
            counter->fetch_add(1);
        }
    } catch (const std::exception& e) {
        // A dead peer must not take request threads down with it.
        open = false;
        spdlog::debug("dropping connection output: {}", e.what());
    }
}

std::shared_ptr<Connection> Connection::create(Broker& broker, FrameSink sink)
{
    return std::shared_ptr<Connection>(new Connection(broker, std::move(sink)));
}

Connection::Connection(Broker& broker, FrameSink sink) : broker_(broker), out_(std::make_shared<Outbound>())
{
    out_->sink = std::move(sink);
    out_->counter = &sent_;
}

Connection::~Connection()
{
    std::lock_guard lock(out_->mu);
    out_->open = false;
    out_->counter = nullptr;
}

void Connection::receive(std::string_view frame)
{
    if (!frame.empty() && frame.back() == '\r') {
        frame.remove_suffix(1);
    }
    json msg = json::parse(frame.begin(), frame.end(), nullptr, false);
    if (msg.is_discarded()) {
        out_->send(errorFrame(nullptr, ErrorCode::ParseError, "parse error"));
        return;
    }
    if (!msg.is_object()) {
        out_->send(errorFrame(nullptr, ErrorCode::InvalidRequest, "a message must be an object"));
        return;
    }

    if (!msg.contains("id")) {
        // Notifications are never answered; only $/cancel has an effect.
        if (msg.value("method", json()).is_string() && msg["method"] == "$/cancel") {
            handleCancel(msg.value("params", json::object()), std::nullopt);
        }
        return;
    }

    auto id = validId(msg["id"]);
    {
        std::lock_guard lock(mu_);
        if (!id || *id <= lastId_) {
            id.reset();
        } else {
            lastId_ = *id;
        }
    }
    if (!id) {
        out_->send(errorFrame(nullptr, ErrorCode::InvalidRequest,
                              "id must be a positive integer greater than every earlier id on this connection"));
        return;
    }
    if (!msg.contains("method") || !msg["method"].is_string()) {
        out_->send(errorFrame(*id, ErrorCode::InvalidRequest, "method must be a string"));
        return;
    }
    if (msg.contains("protocol") && msg["protocol"] != kProtocolVersion) {
        out_->send(errorFrame(*id, ErrorCode::InvalidRequest, "unsupported protocol version",
                              {{"supported", kProtocolVersion}}));
        return;
    }
    json params = msg.contains("params") ? msg["params"] : json::object();
    if (params.is_null()) {
        params = json::object();
    }
    if (!params.is_object()) {
        out_->send(errorFrame(*id, ErrorCode::InvalidRequest, "params must be an object"));
        return;
    }
    auto method = msg["method"].get<std::string>();
    if (method == "$/cancel") {
        handleCancel(params, *id);
        return;
    }
    if (!handlers().contains(method)) {
        out_->send(errorFrame(*id, ErrorCode::MethodNotFound, "unknown method " + method, {{"method", method}}));
        return;
    }
    start(*id, std::move(method), std::move(params));
}

void Connection::handleCancel(const json& params, std::optional<std::int64_t> requestId)
{
    bool cancelled = false;
    auto target = params.is_object() && params.contains("id") ? validId(params["id"]) : std::nullopt;
    if (target) {
        std::lock_guard lock(mu_);
        if (auto it = running_.find(*target); it != running_.end()) {
            it->second.cancel();
            cancelled = true;
        }
    }
    if (requestId) {
        out_->send(responseFrame(*requestId, {{"cancelled", cancelled}}));
    }
}

std::optional<std::string> Connection::laneKeyFor(const std::string& method, const json& params) const
{
    if (params.contains("uri") && params["uri"].is_string()) {
        try {
            return "doc:" + broker_.workspace().makeId(params["uri"].get<std::string>()).str();
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    if (params.contains("sessionId") && params["sessionId"].is_string()) {
        try {
            return "doc:" + broker_.suggest().session(params["sessionId"].get<std::string>()).documentId.str();
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    if (method == "chat/send" && params.contains("conversationId") && params["conversationId"].is_string()) {
        return "conv:" + params["conversationId"].get<std::string>();
    }
    return std::nullopt;
}

void Connection::start(std::int64_t id, std::string method, json params)
{
    CancelToken token;
    std::optional<std::string> lane = laneKeyFor(method, params);
    std::uint64_t ticket = 0;
    {
        std::lock_guard lock(mu_);
        if (closed_) {
            return;
        }
        running_.emplace(id, token);
        if (lane) {
            ticket = lanes_[*lane].nextTicket++;
        }
        ++active_;
    }
    auto self = shared_from_this();
    std::thread([self, id, method = std::move(method), params = std::move(params), token, lane, ticket] {
        self->run(id, method, params, token, lane, ticket);
    }).detach();
}

bool Connection::waitTurn(const std::string& lane, std::uint64_t ticket, const CancelToken& cancel)
{
    std::unique_lock lock(mu_);
    for (;;) {
        auto& l = lanes_[lane];
        if (l.serving == ticket) {
            return true;
        }
        if (cancel.cancelled()) {
            l.done.insert(ticket);
            return false;
        }
        idleCv_.wait_for(lock, std::chrono::milliseconds(10));
    }
}

void Connection::leaveLane(const std::string& lane, std::uint64_t ticket)
{
    std::lock_guard lock(mu_);
    auto& l = lanes_[lane];
    if (l.serving != ticket) {
        return;
    }
    ++l.serving;
    while (l.done.erase(l.serving) > 0) {
        ++l.serving;
    }
    if (l.serving == l.nextTicket) {
        lanes_.erase(lane);
    }
    idleCv_.notify_all();
}

void Connection::run(std::int64_t id, const std::string& method, const json& params, const CancelToken& cancel,
                     const std::optional<std::string>& lane, std::uint64_t ticket)
{
    std::string frame;
    bool inTurn = !lane || waitTurn(*lane, ticket, cancel);
    if (!inTurn) {
        frame = errorFrame(id, ErrorCode::Cancelled, "request cancelled");
    } else {
        std::weak_ptr<Outbound> weakOut = out_;
        CallContext ctx;
        ctx.requestId = id;
        ctx.cancel = cancel;
        ctx.notify = [this](std::string_view m, const json& p) { out_->send(notificationFrame(m, p)); };
        ctx.detachedNotifier = [weakOut] {
            return std::function<void(std::string_view, const json&)>([weakOut](std::string_view m, const json& p) {
                if (auto out = weakOut.lock()) {
                    out->send(notificationFrame(m, p));
                }
            });
        };
        try {
            frame = responseFrame(id, dispatch(broker_, method, params, ctx));
        } catch (const Error& e) {
            frame = errorFrame(id, e.code(), e.what(), e.data());
        } catch (const nlohmann::json::exception& e) {
            frame = errorFrame(id, ErrorCode::InvalidParams, e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} failed: {}", method, e.what());
            frame = errorFrame(id, ErrorCode::InternalError, e.what());
        }
        if (lane) {
            leaveLane(*lane, ticket);
        }
    }
    out_->send(frame);
    if (inTurn && method == "admin/shutdown") {
        broker_.requestShutdown();
    }

    std::lock_guard lock(mu_);
    running_.erase(id);
    --active_;
    idleCv_.notify_all();
}

void Connection::waitIdle()
{
    std::unique_lock lock(mu_);
    idleCv_.wait(lock, [this] { return active_ == 0; });
}

void Connection::abandon()
{
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        for (auto& [_, token] : running_) {
            token.cancel();
        }
    }
    std::lock_guard lock(out_->mu);
    out_->open = false;
}

void Connection::close()
{
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        for (auto& [_, token] : running_) {
            token.cancel();
        }
    }
    waitIdle();
    std::lock_guard lock(out_->mu);
    out_->open = false;
}

}  // namespace assist
