#pragma once

#include <atomic>
#include <chrono>
#include <memory>

#include "toolseq/model.hpp"

namespace toolseq {

class Clock {
public:
    virtual ~Clock() = default;
    virtual Millis now() = 0;
};

/// Wall-independent monotonic time, relative to construction.
class SteadyClock final : public Clock {
public:
    SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
    Millis now() override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

/// Advances by a fixed tick on every read. Code that brackets an interval
/// with exactly two reads therefore measures one tick per interval.
class TickingClock final : public Clock {
public:
    explicit TickingClock(Millis tick = 1, Millis start = 0) : tick_(tick), next_(start) {}
    Millis now() override { return next_.fetch_add(tick_); }

private:
    Millis tick_;
    std::atomic<Millis> next_;
};

/// Never moves.
class FrozenClock final : public Clock {
public:
    explicit FrozenClock(Millis at = 0) : at_(at) {}
    Millis now() override { return at_; }

private:
    Millis at_;
};

enum class ClockKind { Steady, Ticking };

inline std::unique_ptr<Clock> make_clock(ClockKind kind) {
    if (kind == ClockKind::Ticking) return std::make_unique<TickingClock>();
    return std::make_unique<SteadyClock>();
}

}  // namespace toolseq
