#include "assist/cancel.hpp"

#include <vector>

#include "assist/error.hpp"

namespace assist {

void CancelToken::cancel() const
{
    // Held while callbacks run so removeCallback cannot return mid-call.
    std::lock_guard firing(state_->fireMu);
    std::vector<std::function<void()>> fire;
    {
        std::lock_guard lock(state_->mu);
        if (state_->cancelled) {
            return;
        }
        state_->cancelled = true;
        for (auto& [_, fn] : state_->callbacks) {
            fire.push_back(std::move(fn));
        }
        state_->callbacks.clear();
    }
    state_->cv.notify_all();
    for (auto& fn : fire) {
        fn();
    }
}

bool CancelToken::cancelled() const
{
    std::lock_guard lock(state_->mu);
    return state_->cancelled;
}

bool CancelToken::sleepFor(std::chrono::milliseconds d) const
{
    std::unique_lock lock(state_->mu);
    return !state_->cv.wait_for(lock, d, [this] { return state_->cancelled; });
}

std::size_t CancelToken::onCancel(std::function<void()> fn) const
{
    {
        std::lock_guard lock(state_->mu);
        if (!state_->cancelled) {
            std::size_t id = state_->nextId++;
            state_->callbacks.emplace(id, std::move(fn));
            return id;
        }
    }
    fn();
    return 0;
}

void CancelToken::removeCallback(std::size_t id) const
{
    std::lock_guard firing(state_->fireMu);
    std::lock_guard lock(state_->mu);
    state_->callbacks.erase(id);
}

void CancelToken::throwIfCancelled() const
{
    if (cancelled()) {
        throw Error(ErrorCode::Cancelled, "request cancelled");
    }
}

}  // namespace assist
