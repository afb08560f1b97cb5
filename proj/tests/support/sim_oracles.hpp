#pragma once

#include <cstdint>
#include <vector>

#include "aoiq/sim/facility.hpp"

namespace aoiq::oracle {

// Service times (slots from entering service to departure) of `packets`
// packets pushed back-to-back through a saturated facility.
inline std::vector<int> measure_service_times(double q, std::int64_t packets, std::uint64_t seed) {
  sim::Facility f(q);
  Rng rng(seed);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(packets));
  f.enqueue({});
  int in_service_for = 0;
  while (static_cast<std::int64_t>(out.size()) < packets) {
    if (f.queue().empty()) f.enqueue({});
    ++in_service_for;
    if (f.step(rng)) {
      out.push_back(in_service_for);
      in_service_for = 0;
    }
  }
  return out;
}

}  // namespace aoiq::oracle
