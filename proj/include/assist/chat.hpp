#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "assist/cancel.hpp"
#include "assist/context.hpp"
#include "assist/providers.hpp"
#include "assist/workspace.hpp"

namespace assist {

struct Conversation {
    std::string id;
    std::vector<ChatMessage> messages;
    std::vector<PromptContext> attachments;
    /// Milliseconds since the Unix epoch.
    std::int64_t createdAt = 0;
};

/// Edits sorted by ascending start, pairwise non-overlapping, all expressed
/// against `baseVersion`.
struct Patch {
    DocumentId documentId;
    std::int64_t baseVersion = 0;
    std::vector<TextEdit> edits;
};

/// Contents of the first ``` fenced block, without the fence lines and
/// without the final line break. nullopt when there is no closed block.
std::optional<std::string> extractFirstCodeBlock(std::string_view reply);

/// Handler for a "/name arg" chat input; returns the assistant reply.
using PluginHandler = std::function<std::string(std::string_view arg)>;

class PluginRegistry {
public:
    /// Ships with "echo", which replies with its argument.
    PluginRegistry();

    void add(std::string name, PluginHandler handler);
    const PluginHandler* find(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, PluginHandler, std::less<>> handlers_;
};

struct ChatOptions {
    std::size_t historyCap = 64;
    /// A single message larger than this is refused with ConversationTooLong.
    std::size_t maxMessageBytes = 32768;
    double temperature = 0.2;
    ContextCaps caps;
    /// Root for conversation logs; nullopt disables persistence.
    std::optional<std::filesystem::path> stateDir;
};

using WallClock = std::function<std::int64_t()>;

/// Milliseconds since the epoch from the system clock.
std::int64_t systemNowMs();

/// Conversations, prompt-to-code and patch application. One provider call
/// per conversation at a time; concurrent sends on a conversation are
/// served in arrival order.
class ChatService {
public:
    ChatService(Workspace& workspace, const ProviderRegistry& providers, std::map<std::string, Template> templates,
                ChatOptions options = {}, WallClock clock = systemNowMs);

    Conversation newConversation(const std::optional<std::string>& systemPrompt = std::nullopt);
    Conversation conversation(const std::string& id) const;

    /// Appends the user message (plus rendered attachment), calls the chat
    /// provider with the full history and appends the reply. On provider
    /// failure the user message stays in the history.
    ChatMessage sendMessage(const std::string& conversationId, const std::string& text,
                            const std::optional<PromptContext>& attachment = std::nullopt,
                            const ChunkSink& onChunk = {}, const CancelToken& cancel = {});

    /// Single-edit patch replacing `range` with the first fenced block of the
    /// provider's reply to the rendered `templateName` prompt.
    Patch promptToCode(const DocumentId& uri, const Range& range, const std::string& instruction,
                       const CancelToken& cancel = {}, const ChunkSink& onChunk = {},
                       const std::string& templateName = "prompt_to_code");

    /// Applies every edit atomically as one version bump.
    Document applyPatch(const DocumentId& uri, const Patch& patch);

    PluginRegistry& plugins() noexcept { return plugins_; }
    const std::map<std::string, Template>& templates() const noexcept { return templates_; }

    /// Rebuilds a conversation from its log file.
    static Conversation readLog(const std::filesystem::path& file);
    std::optional<std::filesystem::path> logPath(const std::string& id) const;

private:
    struct Slot {
        mutable std::mutex mu;
        std::condition_variable cv;
        std::uint64_t nextTicket = 0;
        std::uint64_t serving = 0;
        std::set<std::uint64_t> abandoned;  // cancelled while queued
        Conversation conv;

        /// Blocks until every earlier sender has finished. Throws Cancelled,
        /// giving up the place in line, if `cancel` fires first.
        std::uint64_t enter(const CancelToken& cancel);
        void leave();
    };

    std::shared_ptr<Slot> slot(const std::string& id) const;
    /// Drops oldest non-system messages past the cap; returns how many.
    std::size_t evict(Conversation& conv) const;
    void append(const std::string& id, const nlohmann::json& record) const;
    std::shared_ptr<Provider> requireChatProvider() const;

    Workspace& workspace_;
    const ProviderRegistry& providers_;
    std::map<std::string, Template> templates_;
    ChatOptions options_;
    WallClock clock_;
    PluginRegistry plugins_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Slot>> conversations_;
    std::uint64_t nextId_ = 1;
    mutable std::mutex logMu_;
};

}  // namespace assist
