#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <thread>

namespace finq {

/// Exponential backoff: delay(n) = base_delay * multiplier^n, capped at 60 s.
/// An operation is attempted at most max_retries + 1 times.
struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds base_delay{50};
    double multiplier = 2.0;

    std::chrono::milliseconds delay(int attempt) const {
        constexpr std::int64_t kCapMs = 60'000;
        const double ms =
            static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt);
        if (!(ms < static_cast<double>(kCapMs))) {
            return std::chrono::milliseconds(kCapMs);
        }
        return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
    }

    void sleep_before_retry(int attempt) const { std::this_thread::sleep_for(delay(attempt)); }
};

} // namespace finq
