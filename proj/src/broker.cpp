#include "assist/broker.hpp"

namespace assist {

namespace {

ProviderRegistry buildProviders(const Config& cfg, const BrokerHooks& hooks)
{
    if (hooks.providers) {
        return ProviderRegistry(*hooks.providers);
    }
    return ProviderRegistry::fromConfigs(cfg.providers);
}

ChatOptions chatOptions(const Config& cfg, const BrokerHooks& hooks)
{
    ChatOptions o;
    o.historyCap = cfg.historyCap;
    o.caps = cfg.caps;
    o.stateDir = hooks.stateDir;
    return o;
}

SuggestOptions suggestOptions(const Config& cfg, const BrokerHooks& hooks)
{
    SuggestOptions o;
    o.debounce = cfg.debounce;
    o.prefetchCapacity = cfg.prefetchCapacity;
    o.maxResults = cfg.maxResults;
    o.caps = cfg.caps;
    o.fetchThreads = hooks.fetchThreads;
    return o;
}

}  // namespace

Broker::Broker(const Config& cfg, BrokerHooks hooks)
    : caps_(cfg.caps),
      workspace_(cfg.workspaceRoot),
      syntax_(buildSyntaxRegistry(cfg)),
      providers_(buildProviders(cfg, hooks)),
      chat_(workspace_, providers_, cfg.templates, chatOptions(cfg, hooks), hooks.clock),
      suggest_(workspace_, providers_, syntax_, suggestOptions(cfg, hooks))
{
}

void Broker::requestShutdown()
{
    std::vector<std::function<void()>> handlers;
    {
        std::lock_guard lock(shutdownMu_);
        if (shutdown_) {
            return;
        }
        shutdown_ = true;
        handlers.swap(shutdownHandlers_);
    }
    shutdownCv_.notify_all();
    for (auto& fn : handlers) {
        fn();
    }
}

bool Broker::shutdownRequested() const
{
    std::lock_guard lock(shutdownMu_);
    return shutdown_;
}

bool Broker::waitForShutdown(std::optional<std::chrono::milliseconds> timeout)
{
    std::unique_lock lock(shutdownMu_);
    if (!timeout) {
        shutdownCv_.wait(lock, [this] { return shutdown_; });
        return true;
    }
    return shutdownCv_.wait_for(lock, *timeout, [this] { return shutdown_; });
}

void Broker::onShutdown(std::function<void()> fn)
{
    {
        std::lock_guard lock(shutdownMu_);
        if (!shutdown_) {
            shutdownHandlers_.push_back(std::move(fn));
            return;
        }
    }
    fn();
}

}  // namespace assist
