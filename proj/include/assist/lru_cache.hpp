#pragma once

#include <cstddef>
#include <list>
#include <map>
#include <optional>
#include <utility>

namespace assist {

/// Fixed-capacity least-recently-used map. Not synchronized.
template <typename Key, typename Value>
class LruCache {
public:
    explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

    std::optional<Value> get(const Key& key)
    {
        auto it = index_.find(key);
        if (it == index_.end()) {
            return std::nullopt;
        }
        order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
    }

    bool contains(const Key& key) const { return index_.contains(key); }

    /// Inserts or refreshes `key`; returns the evicted key, if any.
    std::optional<Key> put(const Key& key, Value value)
    {
        if (auto it = index_.find(key); it != index_.end()) {
            it->second->second = std::move(value);
            order_.splice(order_.begin(), order_, it->second);
            return std::nullopt;
        }
        order_.emplace_front(key, std::move(value));
        index_.emplace(key, order_.begin());
        if (order_.size() <= capacity_) {
            return std::nullopt;
        }
        Key evicted = std::move(order_.back().first);
        index_.erase(evicted);
        order_.pop_back();
        return evicted;
    }

    std::size_t size() const noexcept { return order_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }

private:
    using Entry = std::pair<Key, Value>;

    std::size_t capacity_;
    std::list<Entry> order_;
    std::map<Key, typename std::list<Entry>::iterator> index_;
};

}  // namespace assist
