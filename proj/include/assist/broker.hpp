#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "assist/chat.hpp"
#include "assist/comment_syntax.hpp"
#include "assist/config.hpp"
#include "assist/providers.hpp"
#include "assist/suggest.hpp"
#include "assist/workspace.hpp"

namespace assist {

struct BrokerHooks {
    /// Replaces the providers built from the config (tests inject mocks).
    std::optional<std::vector<std::shared_ptr<Provider>>> providers;
    WallClock clock = systemNowMs;
    /// Conversation logs go under this directory; nullopt disables them.
    std::optional<std::filesystem::path> stateDir;
    std::size_t fetchThreads = 4;
};

/// The daemon's module graph: one workspace shared by the suggestion engine
/// and the chat service. Connections share a broker.
class Broker {
public:
    explicit Broker(const Config& cfg, BrokerHooks hooks = {});

    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    Workspace& workspace() noexcept { return workspace_; }
    const ProviderRegistry& providers() const noexcept { return providers_; }
    const SyntaxRegistry& syntax() const noexcept { return syntax_; }
    SuggestEngine& suggest() noexcept { return suggest_; }
    ChatService& chat() noexcept { return chat_; }
    const ContextCaps& caps() const noexcept { return caps_; }

    void requestShutdown();
    bool shutdownRequested() const;
    /// Returns true once shutdown was requested, false on timeout.
    bool waitForShutdown(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
    /// Runs when shutdown is requested (or immediately if it already was).
    void onShutdown(std::function<void()> fn);

private:
    ContextCaps caps_;
    Workspace workspace_;
    SyntaxRegistry syntax_;
    ProviderRegistry providers_;
    ChatService chat_;
    // Holds a workspace listener; declared after what it observes.
    SuggestEngine suggest_;

    mutable std::mutex shutdownMu_;
    std::condition_variable shutdownCv_;
    bool shutdown_ = false;
    std::vector<std::function<void()>> shutdownHandlers_;
};

}  // namespace assist
