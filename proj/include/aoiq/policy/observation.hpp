#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "aoiq/sim/source.hpp"

namespace aoiq::policy {

/// Actor/critic input variants.
enum class ObservationLayout {
  estimate_and_age,   // default QNet input
  estimate_only,      // QNet-X-hat ablation
  with_network_stats  // QNet-lambda: adds backlog and response inter-arrival time
};

inline int observation_dim(ObservationLayout layout) {
  switch (layout) {
    case ObservationLayout::estimate_and_age: return 5;
    case ObservationLayout::estimate_only: return 4;
    case ObservationLayout::with_network_stats: return 7;
  }
  throw std::invalid_argument("unknown observation layout");
}

inline std::string to_string(ObservationLayout layout) {
  switch (layout) {
    case ObservationLayout::estimate_and_age: return "estimate_and_age";
    case ObservationLayout::estimate_only: return "estimate_only";
    case ObservationLayout::with_network_stats: return "with_network_stats";
  }
  throw std::invalid_argument("unknown observation layout");
}

inline ObservationLayout observation_layout_from_string(const std::string& s) {
  if (s == "estimate_and_age") return ObservationLayout::estimate_and_age;
  if (s == "estimate_only") return ObservationLayout::estimate_only;
  if (s == "with_network_stats") return ObservationLayout::with_network_stats;
  throw std::invalid_argument("unknown observation layout '" + s + "'");
}

struct ObservationScaling {
  double position = 10.0;
  double velocity = 10.0;
  double age = 100.0;
  double backlog = 10.0;
};

/// Extra inputs of the network-statistics layout.
struct NetworkStats {
  int backlog = 0;
  double interarrival_slots = 0.0;
};

// The estimate is given relative to the latest measurement's position.
inline void assemble_observation(ObservationLayout layout, const sim::StateVector& estimate,
                                 const sim::StateVector& latest, double age_slots, const NetworkStats& net,
                                 const ObservationScaling& s, std::vector<double>& out) {
  out.clear();
  out.push_back((estimate[0] - latest[0]) / s.position);
  out.push_back((estimate[1] - latest[1]) / s.position);
  out.push_back(estimate[2] / s.velocity);
  out.push_back(estimate[3] / s.velocity);
  if (layout == ObservationLayout::estimate_only) return;
  out.push_back(age_slots / s.age);
  if (layout == ObservationLayout::with_network_stats) {
    out.push_back(net.backlog / s.backlog);
    out.push_back(net.interarrival_slots / s.age);
  }
}

/// b' = b + 1 on a query, b - 1 (floored at 0) on an arrival; both apply together.
inline int backlog_update(int b, bool queried, bool arrived) {
  if (b < 0) throw std::invalid_argument("backlog must be non-negative");
  if (queried) ++b;
  if (arrived) b = b > 0 ? b - 1 : 0;
  return b;
}

class BacklogCounter {
 public:
  void update(bool queried, bool arrived) { b_ = backlog_update(b_, queried, arrived); }
  int value() const { return b_; }
  void reset() { b_ = 0; }

 private:
  int b_ = 0;
};

}  // namespace aoiq::policy
