#pragma once

#include <algorithm>
#include <stdexcept>

namespace aoiq::sac {

/// Shifted, scaled and clamped squared-error reward.
struct RewardShape {
  double scale = 5.0;       // reward at zero error
  double max_error = 8e4;   // squared error at which the reward reaches zero
};

inline double reward(double err_sq, const RewardShape& shape = {}) {
  if (!(err_sq >= 0.0)) throw std::invalid_argument("reward: squared error must be non-negative");
  return shape.scale * (1.0 - std::min(err_sq, shape.max_error) / shape.max_error);
}

}  // namespace aoiq::sac
