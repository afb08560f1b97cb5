#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include "aoiq/estimator/estimator.hpp"
#include "aoiq/policy/baselines.hpp"
#include "aoiq/policy/qnet.hpp"
#include "aoiq/sim/episode.hpp"

namespace aoiq::estimator {

struct PretrainConfig {
  int episodes = 200;
  int episode_length = 2000;
  std::uint64_t seed = 7;
  int update_every = 64;  // environment slots per estimator update
  int batch_windows = 8;
  int min_windows = 32;   // replay fill before the first update
  std::size_t replay_windows = 512;
  double min_q = 1e-3;    // lower clamp on the per-episode q draw
};

struct PretrainStats {
  int updates = 0;
  std::int64_t slots = 0;
  std::int64_t queries = 0;
  double expected_queries = 0.0;  // sum over slots of q/2
  std::vector<double> losses;
  std::vector<double> episode_q;
};

namespace detail {
class SlotCallback final : public sim::TransitionSink {
 public:
  explicit SlotCallback(std::function<void(const sim::SlotRecord&)> f) : f_(std::move(f)) {}
  void on_slot(const sim::SlotRecord& r) override { f_(r); }

 private:
  std::function<void(const sim::SlotRecord&)> f_;
};
}  // namespace detail

/// Warm-starts the estimator on episodes that query with probability q/2,
/// q ~ U(0, 1) per episode. Only estimator weights change.
inline PretrainStats pretrain(std::shared_ptr<EstimatorModel> model, const PretrainConfig& cfg) {
  if (!model) throw std::invalid_argument("pretrain: no model");
  if (cfg.batch_windows < 1 || cfg.update_every < 1) throw std::invalid_argument("pretrain: bad cadence");
  PretrainStats stats;
  SequenceReplay replay(cfg.replay_windows);
  Rng rng(derive_seed(cfg.seed, 0x9e7));
  sim::EpisodeConfig ep;
  ep.episode_length = cfg.episode_length;

  std::int64_t slot_counter = 0;
  detail::SlotCallback sink([&](const sim::SlotRecord& rec) {
    stats.queries += rec.action;
    stats.expected_queries += rec.q / 2.0;
    ++stats.slots;
    if (++slot_counter % cfg.update_every != 0) return;
    if (replay.size() < static_cast<std::size_t>(std::max(cfg.min_windows, cfg.batch_windows))) return;
    const auto batch = replay.sample(static_cast<std::size_t>(cfg.batch_windows), rng);
    stats.losses.push_back(estimator_train_step(*model, batch));
    ++stats.updates;
  });

  for (int e = 0; e < cfg.episodes; ++e) {
    const double q = std::max(cfg.min_q, rng.uniform());
    stats.episode_q.push_back(q);
    policy::BernoulliQuery querier(q / 2.0, std::make_unique<policy::NeuralEstimate>(model, &replay));
    ep.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(e));
    sim::simulate_episode(q, ep, querier, &sink);
  }
  return stats;
}

/// Same, applied to a bundle's estimator; actor, critic and temperature are untouched.
inline PretrainStats pretrain(policy::QNetModel& bundle, const PretrainConfig& cfg) {
  return pretrain(bundle.estimator, cfg);
}

}  // namespace aoiq::estimator
