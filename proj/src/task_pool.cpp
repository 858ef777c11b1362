#include "assist/task_pool.hpp"

#include <spdlog/spdlog.h>

namespace assist {

TaskPool::TaskPool(std::size_t threads)
{
    if (threads == 0) {
        threads = 1;
    }
    workers_.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) {
        workers_.emplace_back([this] { run(); });
    }
}

TaskPool::~TaskPool()
{
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) {
        t.join();
    }
}

void TaskPool::post(std::function<void()> task)
{
    {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(task));
    }
    cv_.notify_one();
}

void TaskPool::waitIdle()
{
    std::unique_lock lock(mu_);
    idleCv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

void TaskPool::run()
{
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) {
                return;
            }
            task = std::move(queue_.front());
            queue_.pop_front();
            ++running_;
        }
        try {
            task();
        } catch (const std::exception& e) {
            spdlog::error("background task failed: {}", e.what());
        }
        {
            std::lock_guard lock(mu_);
            --running_;
        }
        idleCv_.notify_all();
    }
}

}  // namespace assist
