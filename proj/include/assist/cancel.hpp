#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>

namespace assist {

/// Shared cancellation flag. Copies observe the same state. Callbacks
/// registered with onCancel run once, on the cancelling thread (or
/// immediately if already cancelled).
class CancelToken {
public:
    CancelToken() : state_(std::make_shared<State>()) {}

    void cancel() const;
    bool cancelled() const;

    /// Sleeps up to `d`; returns false if cancelled first.
    bool sleepFor(std::chrono::milliseconds d) const;

    std::size_t onCancel(std::function<void()> fn) const;
    void removeCallback(std::size_t id) const;

    /// Throws Error(Cancelled) when cancelled.
    void throwIfCancelled() const;

private:
    struct State {
        std::mutex fireMu;
        std::mutex mu;
        std::condition_variable cv;
        bool cancelled = false;
        std::size_t nextId = 1;
        std::map<std::size_t, std::function<void()>> callbacks;
    };
    std::shared_ptr<State> state_;
};

/// RAII registration of a cancel callback.
class CancelCallback {
public:
    CancelCallback(const CancelToken& token, std::function<void()> fn)
        : token_(token), id_(token.onCancel(std::move(fn))) {}
    ~CancelCallback() { token_.removeCallback(id_); }
    CancelCallback(const CancelCallback&) = delete;
    CancelCallback& operator=(const CancelCallback&) = delete;

private:
    CancelToken token_;
    std::size_t id_;
};

}  // namespace assist
