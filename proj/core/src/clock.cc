#include "pilot/clock.h"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <thread>

#include "pilot/error.h"

namespace pilot {

std::string_view to_string(ClockMode m) {
  return m == ClockMode::kReal ? "real" : "virtual";
}

ClockMode parse_clock_mode(std::string_view s) {
  if (s == "real") return ClockMode::kReal;
  if (s == "virtual") return ClockMode::kVirtual;
  throw std::invalid_argument("unknown clock mode '" + std::string(s) + "'");
}

Clock::Clock(ClockMode mode) : mode_(mode), origin_(std::chrono::steady_clock::now()) {}

Duration Clock::now() const {
  if (mode_ == ClockMode::kVirtual) {
    return Duration{virtual_us_.load(std::memory_order_acquire)};
  }
  return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - origin_);
}

void Clock::advance_to(Duration t) {
  if (mode_ != ClockMode::kVirtual) {
    throw std::logic_error("advance_to on a real clock");
  }
  auto cur = virtual_us_.load(std::memory_order_acquire);
  if (t.count() < cur) {
    throw TimeRegression("virtual clock cannot move back from " +
                         format_seconds(Duration{cur}) + " to " + format_seconds(t));
  }
  virtual_us_.store(t.count(), std::memory_order_release);
}

void Clock::wait_until(Duration t) {
  if (mode_ == ClockMode::kVirtual) {
    if (t > now()) advance_to(t);
    return;
  }
  std::this_thread::sleep_until(origin_ + t);
}

void EventLoop::at(Duration t, Callback fn) {
  if (clock_.mode() == ClockMode::kVirtual && t < clock_.now()) {
    throw TimeRegression("event scheduled at " + format_seconds(t) + " before now " +
                         format_seconds(clock_.now()));
  }
  heap_.push_back(Entry{t, next_seq_++, std::move(fn)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

void EventLoop::after(Duration delay, Callback fn) {
  if (delay < Duration{0}) throw std::invalid_argument("negative event delay");
  at(clock_.now() + delay, std::move(fn));
}

bool EventLoop::step() {
  if (heap_.empty()) return false;
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  Entry e = std::move(heap_.back());
  heap_.pop_back();
  clock_.wait_until(e.t);
  ++executed_;
  e.fn();
  return true;
}

void EventLoop::run() {
  while (step()) {
  }
}

}  // namespace pilot
