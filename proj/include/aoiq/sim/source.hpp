#pragma once

#include <cmath>

#include <Eigen/Core>

#include "aoiq/core/random.hpp"

namespace aoiq::sim {

/// Slots are the unit of time inside the simulator; this is their nominal length.
inline constexpr double kSlotSeconds = 0.1;

/// (x, y, vx, vy) in meters and meters/second.
using StateVector = Eigen::Vector4d;

struct SourceState {
  double position_x = 0.0;
  double position_y = 0.0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;

  double speed() const { return std::hypot(velocity_x, velocity_y); }

  StateVector vector() const { return {position_x, position_y, velocity_x, velocity_y}; }

  static SourceState from_vector(const StateVector& v) { return {v[0], v[1], v[2], v[3]}; }

  friend bool operator==(const SourceState&, const SourceState&) = default;
};

// 2D double integrator driven by truncated-Gaussian acceleration.
struct SourceParams {
  double max_speed = 10.0;
  double acceleration_std = 1.0;
  double acceleration_bound = 3.0;
  double dt = kSlotSeconds;
};

/// Advances the source by one slot under a given acceleration.
inline SourceState source_step(const SourceState& s, double accel_x, double accel_y,
                               const SourceParams& p = {}) {
  SourceState next = s;
  next.position_x += s.velocity_x * p.dt;
  next.position_y += s.velocity_y * p.dt;
  next.velocity_x += accel_x * p.dt;
  next.velocity_y += accel_y * p.dt;
  const double speed = next.speed();
  if (speed > p.max_speed) {
    const double scale = p.max_speed / speed;
    next.velocity_x *= scale;
    next.velocity_y *= scale;
  }
  return next;
}

inline SourceState source_step(const SourceState& s, Rng& rng, const SourceParams& p = {}) {
  const double ax = rng.truncated_normal(p.acceleration_std, p.acceleration_bound);
  const double ay = rng.truncated_normal(p.acceleration_std, p.acceleration_bound);
  return source_step(s, ax, ay, p);
}

/// Starting state: at the origin with a uniformly random heading and speed.
inline SourceState random_initial_source(Rng& rng, const SourceParams& p = {}) {
  const double heading = rng.uniform(0.0, 2.0 * M_PI);
  const double speed = rng.uniform(0.0, p.max_speed);
  return {0.0, 0.0, speed * std::cos(heading), speed * std::sin(heading)};
}

}  // namespace aoiq::sim
