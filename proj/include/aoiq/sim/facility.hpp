#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>

#include "aoiq/core/random.hpp"
#include "aoiq/sim/source.hpp"

namespace aoiq::sim {

using Slot = std::int64_t;

/// A timestamped source sample traveling as one packet.
struct Measurement {
  SourceState state;
  Slot generated_at = 0;
};

/// Network plus edge-cloud as a single FIFO queue with one server whose
/// per-slot completion probability is q (geometric service times).
class Facility {
 public:
  explicit Facility(double q) : q_(q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("facility q must lie in (0, 1]");
  }

  void enqueue(const Measurement& m) {
    if (!in_service_) {
      in_service_ = m;
    } else {
      queue_.push_back(m);
    }
  }

  // One slot of service. The departing packet (if any) is returned; the queue
  // head is promoted immediately but may depart only from the next slot on.
  std::optional<Measurement> step(Rng& rng) {
    if (!in_service_) return std::nullopt;
    if (!rng.bernoulli(q_)) return std::nullopt;
    std::optional<Measurement> departed = std::move(in_service_);
    in_service_.reset();
    if (!queue_.empty()) {
      in_service_ = queue_.front();
      queue_.pop_front();
    }
    return departed;
  }

  double q() const { return q_; }
  bool idle() const { return !in_service_.has_value(); }
  const std::optional<Measurement>& in_service() const { return in_service_; }
  const std::deque<Measurement>& queue() const { return queue_; }
  std::size_t backlog() const { return queue_.size() + (in_service_ ? 1 : 0); }

 private:
  double q_;
  std::deque<Measurement> queue_;
  std::optional<Measurement> in_service_;
};

/// Age of the freshest measurement held by the agent, in slots.
class AgeClock {
 public:
  AgeClock() = default;
  AgeClock(std::int64_t age, std::optional<Slot> freshest) : age_(age), freshest_(freshest) {}

  /// Advances to slot `now`, applying an optional delivery that happened in the
  /// slot just ended. Returns true if the delivery was fresher than what we had.
  bool tick(const std::optional<Measurement>& delivered, Slot now) {
    if (delivered && delivered->generated_at > now)
      throw std::invalid_argument("delivered measurement generated in the future");
    if (delivered && (!freshest_ || delivered->generated_at > *freshest_)) {
      freshest_ = delivered->generated_at;
      age_ = now - delivered->generated_at;
      return true;
    }
    ++age_;
    return false;
  }

  std::int64_t age() const { return age_; }
  std::optional<Slot> freshest_generation_time() const { return freshest_; }

 private:
  std::int64_t age_ = 0;
  std::optional<Slot> freshest_;
};

}  // namespace aoiq::sim
