#pragma once

#include <stdexcept>

#include "aoiq/trace/schedule.hpp"

namespace aoiq::trace {

/// Byte-accounted FIFO link driven by a delivery-opportunity schedule.
///
/// Packets are sent in non-decreasing time order. Each opportunity carries
/// up to 1500 bytes of the FIFO, possibly finishing one packet and starting
/// the next; an opportunity that passes with the FIFO empty is lost. The
/// schedule wraps cyclically. Since the FIFO drains in order, every packet's
/// delivery time is fixed when it is sent.
class EmulatedLink {
 public:
  explicit EmulatedLink(TraceSchedule schedule) : schedule_(std::move(schedule)) {}

  /// Time at which the last byte of a `bytes`-long packet handed to the link
  /// at `now_ms` is carried.
  Millis send(int bytes, Millis now_ms) {
    if (bytes <= 0) throw std::invalid_argument("link send: packet size must be positive");
    if (now_ms < last_send_) throw std::invalid_argument("link send: time went backwards");
    last_send_ = now_ms;
    if (started_ && remaining_ == 0) {
      ++cursor_;
      remaining_ = kOpportunityBytes;
    }
    // Idle link: whatever was left of past opportunities is gone.
    if (!started_ || schedule_.time_of(cursor_) < now_ms) {
      cursor_ = schedule_.first_at_or_after(now_ms);
      remaining_ = kOpportunityBytes;
      started_ = true;
    }
    int need = bytes;
    for (;;) {
      const int take = std::min(need, remaining_);
      need -= take;
      remaining_ -= take;
      if (need == 0) break;
      ++cursor_;
      remaining_ = kOpportunityBytes;
    }
    bytes_sent_ += bytes;
    const Millis t = schedule_.time_of(cursor_);
    if (t > schedule_.period_ms()) wrapped_ = true;
    return t;
  }

  const TraceSchedule& schedule() const { return schedule_; }
  bool wrapped() const { return wrapped_; }
  std::int64_t bytes_sent() const { return bytes_sent_; }

 private:
  TraceSchedule schedule_;
  std::int64_t cursor_ = 0;  // opportunity holding the FIFO tail
  int remaining_ = 0;        // unused bytes of that opportunity
  bool started_ = false;
  bool wrapped_ = false;
  Millis last_send_ = 0;
  std::int64_t bytes_sent_ = 0;
};

}  // namespace aoiq::trace
