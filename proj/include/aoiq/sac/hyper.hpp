#pragma once

#include <stdexcept>
#include <string>

namespace aoiq::sac {

/// The four trained model families: three q sub-ranges and one full-range model.
enum class RangeId { low, mid, high, one };

inline std::string to_string(RangeId r) {
  switch (r) {
    case RangeId::low: return "low";
    case RangeId::mid: return "mid";
    case RangeId::high: return "high";
    case RangeId::one: return "one";
  }
  throw std::invalid_argument("unknown range id");
}

inline RangeId range_from_string(const std::string& s) {
  if (s == "low") return RangeId::low;
  if (s == "mid") return RangeId::mid;
  if (s == "high") return RangeId::high;
  if (s == "one") return RangeId::one;
  throw std::invalid_argument("unknown range id '" + s + "' (expected low, mid, high or one)");
}

struct SacHyper {
  int n_step = 10;
  double target_entropy = 0.6;
  double lr_actor_critic = 1.5e-4;
  double lr_estimator = 1e-4;
  double lr_temperature = 1.5e-4;
  double gamma = 0.99;
  int batch_size = 128;
  double tau_polyak = 0.005;
  double q_low = 0.3;
  double q_high = 1.0;
  int hidden_width = 64;
  double initial_alpha = 1.0;
  double grad_clip = 10.0;
  double critic_value_offset = 500.0;  // initial critic output bias: r_s / (1 - gamma)
  double initial_query_probability = 0.5;  // actor output bias at initialization
  bool train_actor = true;
  bool tune_temperature = true;
};

/// Per-range n-step length and target entropy.
inline SacHyper hyper_for(RangeId r) {
  SacHyper h;
  switch (r) {
    case RangeId::low:
      h.q_low = 0.05, h.q_high = 0.1, h.n_step = 60, h.target_entropy = 0.09;
      break;
    case RangeId::mid:
      h.q_low = 0.1, h.q_high = 0.3, h.n_step = 20, h.target_entropy = 0.3;
      break;
    case RangeId::high:
      h.q_low = 0.3, h.q_high = 1.0, h.n_step = 10, h.target_entropy = 0.6;
      break;
    case RangeId::one:
      h.q_low = 0.05, h.q_high = 1.0, h.n_step = 50, h.target_entropy = 0.2;
      break;
  }
  return h;
}

}  // namespace aoiq::sac
