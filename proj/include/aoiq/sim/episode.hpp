#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/policy/policy.hpp"
#include "aoiq/sac/reward.hpp"
#include "aoiq/sim/facility.hpp"
#include "aoiq/sim/source.hpp"

namespace aoiq::sim {

struct EpisodeConfig {
  double q_low = 0.05;
  double q_high = 1.0;
  int episode_length = 2000;
  double gamma = 0.99;
  std::uint64_t seed = 1;
  SourceParams source;
  int warmup_slots = 0;  // slots excluded from the returned averages
  sac::RewardShape reward;
};

inline void validate(const EpisodeConfig& c) {
  if (!(c.q_low > 0.0 && c.q_low < c.q_high && c.q_high <= 1.0))
    throw std::invalid_argument("q_range must satisfy 0 < low < high <= 1");
  if (c.episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (c.warmup_slots < 0 || c.warmup_slots >= c.episode_length)
    throw std::invalid_argument("warmup_slots must lie in [0, episode_length)");
}

/// What a sink learns about slot `slot` once its reward is known (one slot later).
struct SlotRecord {
  Slot slot = 0;
  double q = 0.0;
  std::span<const double> observation;  // features behind `action`
  int action = 0;
  double reward = 0.0;   // from the estimate error after the slot's transition
  double err_sq = 0.0;   // same error, squared, all four state components
  double age_slots = 0.0;
  bool terminal = false;
};

/// Receives per-slot records. Implementations used by concurrent rollouts must
/// tolerate concurrent calls.
class TransitionSink {
 public:
  virtual ~TransitionSink() = default;
  virtual void on_slot(const SlotRecord& record) = 0;
  virtual void on_episode_end() {}
};

struct EpisodeStats {
  std::uint64_t seed = 0;
  double q = 0.0;
  double avg_age_slots = 0.0;
  double avg_err = 0.0;     // mean Euclidean position error (meters)
  double std_err = 0.0;     // population std of the per-slot position error
  double avg_err_sq = 0.0;  // mean squared error over all four state components
  double query_rate = 0.0;  // queries per slot
  std::int64_t final_age_slots = 0;
  int slots = 0;
  int deliveries = 0;

  friend bool operator==(const EpisodeStats&, const EpisodeStats&) = default;
};

inline std::string episode_stats_csv_header() { return "seed,q,avg_age_slots,avg_err,query_rate"; }

inline std::string to_csv_row(const EpisodeStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.6f,%.6f,%.6f,%.6f", static_cast<unsigned long long>(s.seed), s.q,
                s.avg_age_slots, s.avg_err, s.query_rate);
  return buf;
}

/// One episode against a facility with fixed `q`.
///
/// Per slot tau: the policy estimates X-hat(tau) from (age, latest measurement)
/// and acts; a query enqueues the current source sample; the facility serves
/// one slot; the age clock and source advance to tau+1; the estimate at tau+1
/// scores the action at tau.
inline EpisodeStats simulate_episode(double q, const EpisodeConfig& cfg, policy::Policy& policy,
                                     TransitionSink* sink = nullptr) {
  if (cfg.episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  Rng master(cfg.seed);
  Rng source_rng = master.split(1);
  Rng facility_rng = master.split(2);
  const std::uint64_t policy_seed = derive_seed(cfg.seed, 3);

  Facility facility(q);
  SourceState source = random_initial_source(source_rng, cfg.source);
  AgeClock clock(0, Slot{0});
  StateVector latest = source.vector();
  policy.reset(latest, policy_seed);

  EpisodeStats stats;
  stats.seed = cfg.seed;
  stats.q = q;

  StateVector truth = source.vector();
  bool arrived = false;
  StateVector estimate = policy.estimate({0.0, latest, &truth, false});
  double age_sum = 0.0, err_sum = 0.0, err_norm_sq_sum = 0.0, err_sq_sum = 0.0;
  int queries = 0, counted = 0;
  std::vector<double> obs;

  for (Slot tau = 0; tau < cfg.episode_length; ++tau) {
    const double age_now = static_cast<double>(clock.age());
    const policy::DecisionInput in{age_now, latest, &truth, arrived};
    const int action = policy.act(in);
    if (action != 0 && action != 1) throw std::logic_error("policy " + policy.name() + " returned a non-binary action");
    const auto features = policy.observation();
    obs.assign(features.begin(), features.end());

    if (tau >= cfg.warmup_slots) {
      const StateVector diff = estimate - truth;
      age_sum += age_now;
      const double e = diff.head<2>().norm();
      err_sum += e;
      err_norm_sq_sum += e * e;
      err_sq_sum += diff.squaredNorm();
      queries += action;
      ++counted;
    }

    if (action == 1) facility.enqueue({source, tau});
    const auto departed = facility.step(facility_rng);
    arrived = departed.has_value();
    if (arrived) ++stats.deliveries;
    if (clock.tick(departed, tau + 1)) latest = departed->state.vector();
    source = source_step(source, source_rng, cfg.source);
    truth = source.vector();

    estimate = policy.estimate({static_cast<double>(clock.age()), latest, &truth, arrived});
    const double err_sq = (estimate - truth).squaredNorm();
    if (sink) {
      SlotRecord rec;
      rec.slot = tau;
      rec.q = q;
      rec.observation = obs;
      rec.action = action;
      rec.err_sq = err_sq;
      rec.reward = sac::reward(err_sq, cfg.reward);
      rec.age_slots = age_now;
      rec.terminal = tau + 1 == cfg.episode_length;
      sink->on_slot(rec);
    }
  }
  if (sink) sink->on_episode_end();

  stats.slots = counted;
  stats.avg_age_slots = age_sum / counted;
  stats.avg_err = err_sum / counted;
  stats.std_err = std::sqrt(std::max(0.0, err_norm_sq_sum / counted - stats.avg_err * stats.avg_err));
  stats.avg_err_sq = err_sq_sum / counted;
  stats.query_rate = static_cast<double>(queries) / counted;
  stats.final_age_slots = clock.age();
  return stats;
}

/// Draws q uniformly from the configured range, then simulates.
inline EpisodeStats run_episode(const EpisodeConfig& cfg, policy::Policy& policy, TransitionSink* sink = nullptr) {
  validate(cfg);
  Rng q_rng(derive_seed(cfg.seed, 0));
  const double q = q_rng.uniform(cfg.q_low, cfg.q_high);
  return simulate_episode(q, cfg, policy, sink);
}

struct AgeCurvePoint {
  double arrival_probability = 0.0;
  double utilization = 0.0;  // p / q
  double average_age = 0.0;  // slots
};

/// Monte-Carlo average age when packets arrive i.i.d. Bernoulli(p) per slot.
inline std::vector<AgeCurvePoint> bernoulli_arrival_age_curve(double q, std::span<const double> p_grid,
                                                              std::int64_t slots, std::uint64_t seed) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("age curve: q must lie in (0, 1]");
  if (slots < 1) throw std::invalid_argument("age curve: slots must be >= 1");
  for (double p : p_grid)
    if (!(p > 0.0 && p <= q))
      throw std::invalid_argument("age curve: arrival probability " + std::to_string(p) + " outside (0, q]");
  std::vector<AgeCurvePoint> out;
  for (std::size_t k = 0; k < p_grid.size(); ++k) {
    const double p = p_grid[k];
    Rng rng(derive_seed(seed, k));
    Facility facility(q);
    AgeClock clock(0, Slot{0});
    double sum = 0.0;
    for (Slot t = 0; t < slots; ++t) {
      sum += static_cast<double>(clock.age());
      if (rng.bernoulli(p)) facility.enqueue({SourceState{}, t});
      clock.tick(facility.step(rng), t + 1);
    }
    out.push_back({p, p / q, sum / static_cast<double>(slots)});
  }
  return out;
}

}  // namespace aoiq::sim
