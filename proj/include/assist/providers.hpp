#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "assist/cancel.hpp"

namespace assist {

enum class ProviderKind { Completion, Chat, Mock };

std::string_view providerKindName(ProviderKind kind);
std::optional<ProviderKind> parseProviderKind(std::string_view name);

struct ProviderConfig {
    std::string id;
    ProviderKind kind = ProviderKind::Mock;
    std::string endpoint;
    /// Name of the environment variable holding the secret; empty for none.
    std::string credentialRef;
    std::string modelName;
    std::int64_t timeoutMs = 5000;
    /// Lower runs earlier.
    std::int64_t priority = 0;

    // Mock-only knobs.
    std::int64_t mockLatencyMs = 0;
    bool mockSyntheticFallback = false;
};

struct CompletionRequest {
    std::string prefix;
    std::string suffix;
    std::string languageId;
    std::string relativePath;
    int maxResults = 3;
    /// Informational: version of the document the request was built from.
    std::int64_t documentVersion = -1;
};

enum class ReplaceHint { AtCursor };

struct Completion {
    std::string text;
    ReplaceHint replaceHint = ReplaceHint::AtCursor;

    bool operator==(const Completion&) const = default;
};

enum class ChatRole { System, User, Assistant };

std::string_view chatRoleName(ChatRole role);
std::optional<ChatRole> parseChatRole(std::string_view name);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.2;
    std::string modelName;
};

using ChunkSink = std::function<void(std::string_view chunk)>;

/// Throws InvalidParams when maxResults is outside [1, 10].
void validate(const CompletionRequest& req);
/// Throws InvalidParams unless the request has a user message, non-empty
/// user/assistant content and temperature in [0, 2].
void validate(const ChatRequest& req);

/// Replaces every occurrence of `secret` in `text` with "***".
std::string scrubSecret(std::string text, std::string_view secret);

/// A suggestion or chat backend. Implementations are safe to call
/// concurrently.
class Provider {
public:
    explicit Provider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Provider() = default;

    const ProviderConfig& config() const noexcept { return cfg_; }
    const std::string& id() const noexcept { return cfg_.id; }

    bool servesCompletions() const noexcept { return cfg_.kind != ProviderKind::Chat; }
    bool servesChat() const noexcept { return cfg_.kind != ProviderKind::Completion; }

    /// At most maxResults entries, in provider order. Throws Timeout,
    /// AuthFailed, ProtocolError or Cancelled.
    virtual std::vector<Completion> fetchCompletions(const CompletionRequest& req, const CancelToken& cancel) = 0;

    /// Streams the reply through `onChunk`; the chunks concatenate to the
    /// returned message's content.
    virtual ChatMessage chatComplete(const ChatRequest& req, const ChunkSink& onChunk, const CancelToken& cancel) = 0;

protected:
    /// Value of the credential variable, or nullopt when none is configured.
    /// Throws AuthFailed when configured but unset.
    std::optional<std::string> credential() const;

private:
    ProviderConfig cfg_;
};

std::unique_ptr<Provider> makeProvider(const ProviderConfig& cfg);

/// The configured providers, ordered by (priority, configuration order).
class ProviderRegistry {
public:
    ProviderRegistry() = default;
    explicit ProviderRegistry(std::vector<std::shared_ptr<Provider>> providers);

    /// Builds providers from configs; throws InvalidParams on duplicate ids
    /// or a non-positive timeout.
    static ProviderRegistry fromConfigs(const std::vector<ProviderConfig>& configs);

    std::vector<std::shared_ptr<Provider>> completionProviders() const;
    /// First chat-capable provider, or nullptr.
    std::shared_ptr<Provider> chatProvider() const;
    std::shared_ptr<Provider> find(std::string_view id) const;
    const std::vector<std::shared_ptr<Provider>>& all() const noexcept { return providers_; }

private:
    std::vector<std::shared_ptr<Provider>> providers_;
};

/// HTTP completion backend: POSTs {prefix,suffix,languageId,path,maxResults}
/// and expects {"completions":[{"text":...}]}.
class HttpCompletionProvider final : public Provider {
public:
    explicit HttpCompletionProvider(ProviderConfig cfg);
    std::vector<Completion> fetchCompletions(const CompletionRequest& req, const CancelToken& cancel) override;
    ChatMessage chatComplete(const ChatRequest& req, const ChunkSink& onChunk, const CancelToken& cancel) override;
};

/// OpenAI-compatible chat-completions backend with event-stream replies.
class OpenAiChatProvider final : public Provider {
public:
    explicit OpenAiChatProvider(ProviderConfig cfg);
    std::vector<Completion> fetchCompletions(const CompletionRequest& req, const CancelToken& cancel) override;
    ChatMessage chatComplete(const ChatRequest& req, const ChunkSink& onChunk, const CancelToken& cancel) override;
};

/// Incremental parser for "data: <json>" event-stream lines.
class SseChatParser {
public:
    /// Feeds raw bytes; returns content deltas completed by this feed.
    std::vector<std::string> feed(std::string_view bytes);
    bool done() const noexcept { return done_; }
    /// Unconsumed bytes, used to recover a non-streamed JSON reply.
    const std::string& rawBody() const noexcept { return raw_; }
    bool sawEvents() const noexcept { return sawEvents_; }

private:
    std::string buffer_;
    std::string raw_;
    bool done_ = false;
    bool sawEvents_ = false;
};

}  // namespace assist
