#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "pilot/time.h"

namespace pilot {

enum class ClockMode { kReal, kVirtual };

std::string_view to_string(ClockMode m);
ClockMode parse_clock_mode(std::string_view s);

// Time since pilot start. Virtual clocks only move through advance_to();
// real clocks follow the steady clock from construction. Reads are safe from
// any thread.
class Clock {
 public:
  explicit Clock(ClockMode mode);

  ClockMode mode() const { return mode_; }
  Duration now() const;

  // Virtual mode only. Throws TimeRegression when t < now().
  void advance_to(Duration t);

  // Blocks (real) or advances (virtual) until now() >= t.
  void wait_until(Duration t);

 private:
  ClockMode mode_;
  std::atomic<std::int64_t> virtual_us_{0};
  std::chrono::steady_clock::time_point origin_;
};

// Deterministic timed-callback queue. Events fire in (time, insertion order);
// callbacks may schedule further events.
class EventLoop {
 public:
  using Callback = std::function<void()>;

  explicit EventLoop(Clock& clock) : clock_(clock) {}
  EventLoop(const EventLoop&) = delete;
  EventLoop& operator=(const EventLoop&) = delete;

  Clock& clock() { return clock_; }
  Duration now() const { return clock_.now(); }

  // In virtual mode t must not precede now(); in real mode late events run
  // as soon as possible.
  void at(Duration t, Callback fn);
  void after(Duration delay, Callback fn);

  // Runs the earliest event. Returns false when the queue is empty.
  bool step();
  void run();

  std::size_t pending() const { return heap_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Entry {
    Duration t;
    std::uint64_t seq;
    Callback fn;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  Clock& clock_;
  std::vector<Entry> heap_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
};

}  // namespace pilot
