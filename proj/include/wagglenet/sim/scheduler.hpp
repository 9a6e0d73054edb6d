#pragma once

// Discrete-event core: a virtual clock and a queue ordered by
// (fire_time, sequence). The sequence number breaks ties in scheduling
// order, which is what makes runs reproducible.

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

namespace wagglenet::sim {

class EventQueue {
  public:
    using Action = std::function<void(double now_s)>;

    /// Processing an event may only schedule at the current time or later.
    void schedule(double fire_time_s, Action action) {
        if (fire_time_s < now_s_)
            throw std::logic_error("event scheduled in the past");
        queue_.push(Entry{fire_time_s, next_sequence_++, std::move(action)});
    }

    bool empty() const { return queue_.empty(); }
    double now() const { return now_s_; }
    std::uint64_t processed() const { return processed_; }

    /// Pops and runs the earliest event; returns false when none remain.
    bool run_next() {
        if (queue_.empty()) return false;
        Entry entry = std::move(const_cast<Entry&>(queue_.top()));
        queue_.pop();
        now_s_ = entry.fire_time_s;
        ++processed_;
        entry.action(now_s_);
        return true;
    }

    /// Runs every event with fire_time <= horizon, then parks the clock at
    /// the horizon.
    void run_until(double horizon_s) {
        while (!queue_.empty() && queue_.top().fire_time_s <= horizon_s) run_next();
        if (horizon_s > now_s_) now_s_ = horizon_s;
    }

  private:
    struct Entry {
        double fire_time_s;
        std::uint64_t sequence;
        Action action;

        bool operator>(const Entry& other) const {
            if (fire_time_s != other.fire_time_s) return fire_time_s > other.fire_time_s;
            return sequence > other.sequence;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue_;
    double now_s_ = 0.0;
    std::uint64_t next_sequence_ = 0;
    std::uint64_t processed_ = 0;
};

}  // namespace wagglenet::sim
