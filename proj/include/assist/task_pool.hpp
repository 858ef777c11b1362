#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace assist {

/// Fixed set of worker threads draining a FIFO queue. The destructor drains
/// queued work before joining.
class TaskPool {
public:
    explicit TaskPool(std::size_t threads);
    ~TaskPool();

    TaskPool(const TaskPool&) = delete;
    TaskPool& operator=(const TaskPool&) = delete;

    void post(std::function<void()> task);
    /// Blocks until the queue is empty and no task is running.
    void waitIdle();

private:
    void run();

    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idleCv_;
    std::deque<std::function<void()>> queue_;
    std::size_t running_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace assist
