#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

#include "finq/errors.hpp"

namespace finq {

/// Bounded multi-producer/multi-consumer queue with close semantics.
/// push blocks while full and throws QueueClosed once closed; pop blocks
/// while empty and returns nullopt once the queue is closed and drained.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    void push(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) {
            raise(ErrorCode::QueueClosed, "queue", "push on closed queue");
        }
        items_.push_back(std::move(item));
        lock.unlock();
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) {
            return std::nullopt; // closed and drained
        }
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    bool closed() const {
        std::lock_guard lock(mutex_);
        return closed_;
    }

    std::size_t depth() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

/// Pipeline envelope: stage output for task number `seq`, or a skip marker
/// when that task produced nothing for downstream (unchanged, failed, ...).
/// Sequence numbers let the index worker apply documents in frontier order
/// regardless of worker interleaving, keeping ingestion reproducible.
template <typename T>
struct Envelope {
    std::uint64_t seq = 0;
    std::optional<T> payload; // nullopt = skip marker
};

} // namespace finq
