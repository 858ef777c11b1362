#include "assist/providers.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "assist/error.hpp"
#include "assist/mock_provider.hpp"

namespace assist {

namespace {

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

Endpoint splitEndpoint(const std::string& url)
{
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw Error(ErrorCode::InvalidParams, "endpoint must be an absolute URL: " + url);
    }
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, slash), url.substr(slash)};
}

std::unique_ptr<httplib::Client> makeClient(const ProviderConfig& cfg, const Endpoint& ep)
{
    auto client = std::make_unique<httplib::Client>(ep.base);
    auto ms = std::chrono::milliseconds(cfg.timeoutMs);
    client->set_connection_timeout(ms);
    client->set_read_timeout(ms);
    client->set_write_timeout(ms);
    return client;
}

[[noreturn]] void throwTransportError(const ProviderConfig& cfg, httplib::Error err, const CancelToken& cancel)
{
    cancel.throwIfCancelled();
    if (err == httplib::Error::Canceled) {
        throw Error(ErrorCode::Cancelled, "request cancelled");
    }
    // Unreachable and silent endpoints both surface as timeouts to callers.
    throw Error(ErrorCode::Timeout,
                "provider " + cfg.id + " did not answer within " + std::to_string(cfg.timeoutMs) + " ms (" +
                    httplib::to_string(err) + ")",
                {{"provider", cfg.id}});
}

void checkStatus(const ProviderConfig& cfg, int status, std::string_view body, const std::optional<std::string>& secret)
{
    if (status >= 200 && status < 300) {
        return;
    }
    std::string excerpt(body.substr(0, 200));
    if (secret) {
        excerpt = scrubSecret(std::move(excerpt), *secret);
    }
    auto code = (status == 401 || status == 403) ? ErrorCode::AuthFailed : ErrorCode::ProtocolError;
    throw Error(code, "provider " + cfg.id + " answered HTTP " + std::to_string(status),
                {{"provider", cfg.id}, {"status", status}, {"body", excerpt}});
}

httplib::Headers authHeaders(const std::optional<std::string>& secret)
{
    httplib::Headers headers{{"Accept", "application/json, text/event-stream"}};
    if (secret) {
        headers.emplace("Authorization", "Bearer " + *secret);
    }
    return headers;
}

}  // namespace

std::string_view providerKindName(ProviderKind kind)
{
    switch (kind) {
    case ProviderKind::Completion: return "completion";
    case ProviderKind::Chat: return "chat";
    case ProviderKind::Mock: return "mock";
    }
    return "mock";
}

std::optional<ProviderKind> parseProviderKind(std::string_view name)
{
    if (name == "completion") return ProviderKind::Completion;
    if (name == "chat") return ProviderKind::Chat;
    if (name == "mock") return ProviderKind::Mock;
    return std::nullopt;
}

std::string_view chatRoleName(ChatRole role)
{
    switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
    }
    return "user";
}

std::optional<ChatRole> parseChatRole(std::string_view name)
{
    if (name == "system") return ChatRole::System;
    if (name == "user") return ChatRole::User;
    if (name == "assistant") return ChatRole::Assistant;
    return std::nullopt;
}

void validate(const CompletionRequest& req)
{
    if (req.maxResults < 1 || req.maxResults > 10) {
        throw Error(ErrorCode::InvalidParams, "maxResults must be within [1, 10]", {{"maxResults", req.maxResults}});
    }
}

void validate(const ChatRequest& req)
{
    if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidParams, "temperature must be within [0, 2]");
    }
    bool hasUser = false;
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        const auto& m = req.messages[i];
        if (m.role == ChatRole::System && i != 0) {
            throw Error(ErrorCode::InvalidParams, "system message must come first");
        }
        if (m.role != ChatRole::System && m.content.empty()) {
            throw Error(ErrorCode::InvalidParams, "chat message content must not be empty");
        }
        hasUser = hasUser || m.role == ChatRole::User;
    }
    if (!hasUser) {
        throw Error(ErrorCode::InvalidParams, "chat request needs a user message");
    }
}

std::string scrubSecret(std::string text, std::string_view secret)
{
    if (secret.empty()) {
        return text;
    }
    std::size_t pos = 0;
    while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "***");
        pos += 3;
    }
    return text;
}

std::optional<std::string> Provider::credential() const
{
    if (cfg_.credentialRef.empty()) {
        return std::nullopt;
    }
    const char* value = std::getenv(cfg_.credentialRef.c_str());
    if (value == nullptr || *value == '\0') {
        throw Error(ErrorCode::AuthFailed,
                    "provider " + cfg_.id + ": credential variable " + cfg_.credentialRef + " is not set",
                    {{"provider", cfg_.id}, {"credentialRef", cfg_.credentialRef}});
    }
    return std::string(value);
}

std::unique_ptr<Provider> makeProvider(const ProviderConfig& cfg)
{
    switch (cfg.kind) {
    case ProviderKind::Completion: return std::make_unique<HttpCompletionProvider>(cfg);
    case ProviderKind::Chat: return std::make_unique<OpenAiChatProvider>(cfg);
    case ProviderKind::Mock: return std::make_unique<MockProvider>(cfg);
    }
    throw Error(ErrorCode::InvalidParams, "unknown provider kind");
}

ProviderRegistry::ProviderRegistry(std::vector<std::shared_ptr<Provider>> providers)
    : providers_(std::move(providers))
{
    std::set<std::string> ids;
    for (const auto& p : providers_) {
        if (!ids.insert(p->id()).second) {
            throw Error(ErrorCode::InvalidParams, "duplicate provider id: " + p->id());
        }
        if (p->config().timeoutMs < 1) {
            throw Error(ErrorCode::InvalidParams, "provider " + p->id() + ": timeoutMs must be >= 1");
        }
    }
    std::stable_sort(providers_.begin(), providers_.end(),
                     [](const auto& a, const auto& b) { return a->config().priority < b->config().priority; });
}

ProviderRegistry ProviderRegistry::fromConfigs(const std::vector<ProviderConfig>& configs)
{
    std::vector<std::shared_ptr<Provider>> providers;
    providers.reserve(configs.size());
    for (const auto& cfg : configs) {
        providers.push_back(makeProvider(cfg));
    }
    return ProviderRegistry(std::move(providers));
}

std::vector<std::shared_ptr<Provider>> ProviderRegistry::completionProviders() const
{
    std::vector<std::shared_ptr<Provider>> out;
    std::copy_if(providers_.begin(), providers_.end(), std::back_inserter(out),
                 [](const auto& p) { return p->servesCompletions(); });
    return out;
}

std::shared_ptr<Provider> ProviderRegistry::chatProvider() const
{
    auto it = std::find_if(providers_.begin(), providers_.end(), [](const auto& p) { return p->servesChat(); });
    return it == providers_.end() ? nullptr : *it;
}

std::shared_ptr<Provider> ProviderRegistry::find(std::string_view id) const
{
    auto it = std::find_if(providers_.begin(), providers_.end(), [id](const auto& p) { return p->id() == id; });
    return it == providers_.end() ? nullptr : *it;
}

HttpCompletionProvider::HttpCompletionProvider(ProviderConfig cfg) : Provider(std::move(cfg)) {}

std::vector<Completion> HttpCompletionProvider::fetchCompletions(const CompletionRequest& req,
                                                                 const CancelToken& cancel)
{
    validate(req);
    auto secret = credential();
    auto ep = splitEndpoint(config().endpoint);
    auto client = makeClient(config(), ep);
    CancelCallback stopOnCancel(cancel, [&client] { client->stop(); });

    nlohmann::json body{{"prefix", req.prefix},
                        {"suffix", req.suffix},
                        {"languageId", req.languageId},
                        {"path", req.relativePath},
                        {"maxResults", req.maxResults}};
    auto res = client->Post(ep.path, authHeaders(secret), body.dump(), "application/json");
    if (!res) {
        throwTransportError(config(), res.error(), cancel);
    }
    checkStatus(config(), res->status, res->body, secret);

    std::vector<Completion> out;
    try {
        auto parsed = nlohmann::json::parse(res->body);
        for (const auto& item : parsed.at("completions")) {
            out.push_back({item.is_string() ? item.get<std::string>() : item.at("text").get<std::string>(),
                           ReplaceHint::AtCursor});
            if (out.size() == static_cast<std::size_t>(req.maxResults)) {
                break;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProtocolError, "provider " + id() + " sent a malformed completions body",
                    {{"provider", id()}, {"detail", e.what()}});
    }
    return out;
}

ChatMessage HttpCompletionProvider::chatComplete(const ChatRequest&, const ChunkSink&, const CancelToken&)
{
    throw Error(ErrorCode::NoProvider, "provider " + id() + " does not serve chat");
}

OpenAiChatProvider::OpenAiChatProvider(ProviderConfig cfg) : Provider(std::move(cfg)) {}

std::vector<Completion> OpenAiChatProvider::fetchCompletions(const CompletionRequest&, const CancelToken&)
{
    throw Error(ErrorCode::NoProvider, "provider " + id() + " does not serve completions");
}

ChatMessage OpenAiChatProvider::chatComplete(const ChatRequest& req, const ChunkSink& onChunk,
                                             const CancelToken& cancel)
{
    validate(req);
    auto secret = credential();
    auto ep = splitEndpoint(config().endpoint);
    auto client = makeClient(config(), ep);
    CancelCallback stopOnCancel(cancel, [&client] { client->stop(); });

    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", chatRoleName(m.role)}, {"content", m.content}});
    }
    nlohmann::json body{{"model", req.modelName.empty() ? config().modelName : req.modelName},
                        {"messages", std::move(messages)},
                        {"temperature", req.temperature},
                        {"stream", true}};

    httplib::Request hreq;
    hreq.method = "POST";
    hreq.path = ep.path;
    hreq.headers = authHeaders(secret);
    hreq.set_header("Content-Type", "application/json");
    hreq.body = body.dump();

    int status = 0;
    SseChatParser parser;
    std::string content;
    std::string errorBody;
    std::exception_ptr streamFailure;
    hreq.response_handler = [&status](const httplib::Response& r) {
        status = r.status;
        return true;
    };
    hreq.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
        if (cancel.cancelled()) {
            return false;
        }
        if (status < 200 || status >= 300) {
            errorBody.append(data, std::min<std::size_t>(len, 512));
            return true;
        }
        try {
            for (auto& delta : parser.feed(std::string_view(data, len))) {
                content += delta;
                if (onChunk) {
                    onChunk(delta);
                }
            }
        } catch (...) {
            streamFailure = std::current_exception();
            return false;
        }
        return true;
    };

    httplib::Response hres;
    httplib::Error err = httplib::Error::Success;
    bool sent = client->send(hreq, hres, err);
    if (streamFailure) {
        std::rethrow_exception(streamFailure);
    }
    if (!sent) {
        throwTransportError(config(), err, cancel);
    }
    checkStatus(config(), status, errorBody, secret);

    if (!parser.sawEvents()) {
        // Server ignored "stream": accept a plain chat-completions object.
        try {
            auto parsed = nlohmann::json::parse(parser.rawBody());
            content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ProtocolError, "provider " + id() + " sent a malformed chat reply",
                        {{"provider", id()}, {"detail", e.what()}});
        }
        if (onChunk) {
            onChunk(content);
        }
    } else if (!parser.done()) {
        throw Error(ErrorCode::ProtocolError, "provider " + id() + " closed the event stream without [DONE]",
                    {{"provider", id()}});
    }
    return {ChatRole::Assistant, content};
}

std::vector<std::string> SseChatParser::feed(std::string_view bytes)
{
    std::vector<std::string> deltas;
    if (!sawEvents_ && raw_.size() < (1U << 20)) {
        raw_.append(bytes);
    }
    buffer_.append(bytes);
    std::size_t nl;
    while ((nl = buffer_.find('\n')) != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.starts_with("data:")) {
            continue;
        }
        sawEvents_ = true;
        std::string_view payload = std::string_view(line).substr(5);
        while (!payload.empty() && payload.front() == ' ') {
            payload.remove_prefix(1);
        }
        if (payload == "[DONE]") {
            done_ = true;
            continue;
        }
        nlohmann::json event;
        try {
            event = nlohmann::json::parse(payload);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ProtocolError, "malformed event-stream chunk", {{"detail", e.what()}});
        }
        const auto& choices = event.value("choices", nlohmann::json::array());
        if (choices.empty()) {
            continue;
        }
        const auto& delta = choices[0].value("delta", nlohmann::json::object());
        if (auto it = delta.find("content"); it != delta.end() && it->is_string()) {
            auto text = it->get<std::string>();
            if (!text.empty()) {
                deltas.push_back(std::move(text));
            }
        }
    }
    return deltas;
}

}  // namespace assist
