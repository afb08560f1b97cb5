#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aoiq/estimator/pretrain.hpp"
#include "aoiq/policy/qnet.hpp"
#include "aoiq/sac/hyper.hpp"
#include "aoiq/sac/learner.hpp"
#include "aoiq/sac/nstep.hpp"
#include "aoiq/sac/replay_buffer.hpp"
#include "aoiq/sim/episode.hpp"

namespace aoiq::sac {

struct TrainConfig {
  RangeId range = RangeId::one;
  SacHyper hyper = hyper_for(RangeId::one);
  estimator::EstimatorConfig estimator{};
  policy::ObservationLayout layout = policy::ObservationLayout::estimate_and_age;
  int episodes = 2000;
  int episode_length = 2000;
  std::uint64_t seed = 1;
  std::size_t replay_capacity = 1'000'000;
  int learning_starts = 2000;         // transitions stored before the first update
  int update_every = 1;               // environment slots per SAC gradient step
  int estimator_update_every = 64;    // environment slots per estimator update
  int estimator_batch = 8;            // windows per estimator update
  std::size_t sequence_replay_windows = 512;
  double wall_clock_limit_s = 0.0;    // 0 disables the limit
  int eval_every = 0;                 // episodes between evaluations; 0 disables
  int eval_episodes = 8;
  std::filesystem::path run_dir;      // empty: nothing is written
};

inline TrainConfig train_config_for(RangeId r) {
  TrainConfig c;
  c.range = r;
  c.hyper = hyper_for(r);
  return c;
}

struct EpisodeLog {
  int episode = 0;
  double q = 0.0;
  double mean_reward = 0.0;
  double query_rate = 0.0;
  double avg_err = 0.0;
  double entropy = 0.0;
  double alpha = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double estimator_loss = 0.0;
  int sac_updates = 0;
  double elapsed_s = 0.0;
};

struct TrainResult {
  policy::QNetModel model;     // final weights, or best-so-far when the budget ran out
  std::vector<EpisodeLog> log;
  std::vector<std::pair<int, double>> evaluations;  // (episode, mean reward)
  bool budget_exhausted = false;
  std::string warning;
  int episodes_run = 0;
};

inline std::string metrics_csv_header() {
  return "episode,q,reward,query_rate,avg_err,entropy,alpha,critic_loss,actor_loss,estimator_loss,sac_updates,elapsed_s";
}

inline std::string to_csv_row(const EpisodeLog& l) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6g,%.6g,%.6g,%.6g,%d,%.3f", l.episode, l.q,
                l.mean_reward, l.query_rate, l.avg_err, l.entropy, l.alpha, l.critic_loss, l.actor_loss,
                l.estimator_loss, l.sac_updates, l.elapsed_s);
  return buf;
}

/// Mean per-slot reward of the sampling policy over fixed held-out episodes
/// with q spread evenly across the training range.
inline double evaluate_reward(const policy::QNetModel& model, const SacHyper& h, int episodes, int length,
                              std::uint64_t seed) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const double q = h.q_low + (h.q_high - h.q_low) * (e + 0.5) / episodes;
    sim::EpisodeConfig ep;
    ep.q_low = h.q_low;
    ep.q_high = h.q_high;
    ep.episode_length = length;
    ep.seed = derive_seed(seed, 50'000 + static_cast<std::uint64_t>(e));
    policy::QNetPolicy p(model, policy::QNetMode::sample);
    struct RewardSum final : sim::TransitionSink {
      double sum = 0.0;
      void on_slot(const sim::SlotRecord& r) override { sum += r.reward; }
    } sink;
    sim::simulate_episode(q, ep, p, &sink);
    total += sink.sum / length;
  }
  return total / episodes;
}

namespace detail {

class TrainingSink final : public sim::TransitionSink {
 public:
  TrainingSink(NStepAccumulator& nstep, std::function<void()> per_slot)
      : nstep_(nstep), per_slot_(std::move(per_slot)) {}
  void on_slot(const sim::SlotRecord& r) override {
    nstep_.on_slot(r);
    reward_sum += r.reward;
    ++slots;
    per_slot_();
  }
  void on_episode_end() override { nstep_.on_episode_end(); }

  double reward_sum = 0.0;
  int slots = 0;

 private:
  NStepAccumulator& nstep_;
  std::function<void()> per_slot_;
};

}  // namespace detail

/// Trains one QNet model (estimator, actor, critic, temperature) on
/// domain-randomised episodes with q ~ U(q_low, q_high). `initial` supplies a
/// warm-started estimator; otherwise a fresh one is created.
inline TrainResult train_qnet(const TrainConfig& cfg, std::shared_ptr<const estimator::EstimatorModel> initial = nullptr,
                              std::function<void(const EpisodeLog&)> on_episode = nullptr) {
  if (cfg.episodes < 1 || cfg.update_every < 1 || cfg.estimator_update_every < 1)
    throw std::invalid_argument("train_qnet: episodes and cadences must be >= 1");
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  policy::QNetModel model =
      policy::QNetModel::create(cfg.hyper, cfg.estimator, cfg.layout, to_string(cfg.range), cfg.seed);
  if (initial) *model.estimator = *initial;

  const int obs_dim = policy::observation_dim(cfg.layout);
  ReplayBuffer buffer(cfg.replay_capacity, obs_dim);
  estimator::SequenceReplay sequences(cfg.sequence_replay_windows);
  NStepAccumulator nstep(cfg.hyper.n_step, cfg.hyper.gamma, [&](Transition&& t) { buffer.push(std::move(t)); });
  Rng learn_rng(derive_seed(cfg.seed, 0x1ea7));

  std::ofstream metrics;
  if (!cfg.run_dir.empty()) {
    std::filesystem::create_directories(cfg.run_dir);
    metrics.open(cfg.run_dir / ("metrics_" + to_string(cfg.range) + ".csv"));
    metrics << metrics_csv_header() << '\n';
  }

  TrainResult result;
  std::optional<nn::Checkpoint> best;
  double best_reward = -1e300;

  std::int64_t slot_counter = 0;
  UpdateStats acc{};
  int updates_in_episode = 0;
  double est_loss_acc = 0.0;
  int est_updates_in_episode = 0;
  auto per_slot = [&] {
    ++slot_counter;
    if (buffer.size() >= static_cast<std::size_t>(std::max(cfg.learning_starts, cfg.hyper.batch_size)) &&
        slot_counter % cfg.update_every == 0) {
      const UpdateStats s = sac_update(buffer, *model.learner, learn_rng);
      acc.critic_loss += s.critic_loss;
      acc.actor_loss += s.actor_loss;
      acc.entropy += s.entropy;
      acc.alpha = s.alpha;
      ++updates_in_episode;
    }
    if (slot_counter % cfg.estimator_update_every == 0 &&
        sequences.size() >= static_cast<std::size_t>(cfg.estimator_batch)) {
      const auto batch = sequences.sample(static_cast<std::size_t>(cfg.estimator_batch), learn_rng);
      est_loss_acc += estimator::estimator_train_step(*model.estimator, batch);
      ++est_updates_in_episode;
    }
  };
  detail::TrainingSink sink(nstep, per_slot);

  sim::EpisodeConfig ep;
  ep.q_low = cfg.hyper.q_low;
  ep.q_high = cfg.hyper.q_high;
  ep.episode_length = cfg.episode_length;
  ep.gamma = cfg.hyper.gamma;

  for (int e = 0; e < cfg.episodes; ++e) {
    if (cfg.wall_clock_limit_s > 0.0 && elapsed() > cfg.wall_clock_limit_s) {
      result.budget_exhausted = true;
      result.warning = "wall-clock budget of " + format_double(cfg.wall_clock_limit_s) + " s exhausted after " +
                       std::to_string(e) + " of " + std::to_string(cfg.episodes) + " episodes";
      break;
    }
    ep.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(e));
    acc = {};
    updates_in_episode = 0;
    est_loss_acc = 0.0;
    est_updates_in_episode = 0;
    sink.reward_sum = 0.0;
    sink.slots = 0;

    policy::QNetPolicy rollout(model, policy::QNetMode::sample, &sequences);
    const sim::EpisodeStats st = sim::run_episode(ep, rollout, &sink);

    EpisodeLog log;
    log.episode = e;
    log.q = st.q;
    log.mean_reward = sink.reward_sum / std::max(1, sink.slots);
    log.query_rate = st.query_rate;
    log.avg_err = st.avg_err;
    log.sac_updates = updates_in_episode;
    if (updates_in_episode > 0) {
      log.critic_loss = acc.critic_loss / updates_in_episode;
      log.actor_loss = acc.actor_loss / updates_in_episode;
      log.entropy = acc.entropy / updates_in_episode;
    }
    log.alpha = model.learner->alpha();
    log.estimator_loss = est_updates_in_episode > 0 ? est_loss_acc / est_updates_in_episode : 0.0;
    log.elapsed_s = elapsed();
    result.log.push_back(log);
    if (metrics.is_open()) metrics << to_csv_row(log) << '\n' << std::flush;
    if (on_episode) on_episode(log);
    result.episodes_run = e + 1;

    if (cfg.eval_every > 0 && (e + 1) % cfg.eval_every == 0) {
      const double r = evaluate_reward(model, cfg.hyper, cfg.eval_episodes, cfg.episode_length, cfg.seed);
      result.evaluations.emplace_back(e + 1, r);
      if (r > best_reward) {
        best_reward = r;
        best = model.to_checkpoint();
      }
    }
  }

  if (result.budget_exhausted && best) {
    result.model = policy::QNetModel::from_checkpoint(*best);
  } else {
    result.model = model;
  }
  if (!cfg.run_dir.empty()) {
    const std::string r = to_string(cfg.range);
    result.model.save(cfg.run_dir / ("qnet_" + r + ".ckpt"));
    if (best) nn::save_checkpoint(*best, cfg.run_dir / ("qnet_" + r + "_best.ckpt"));
    if (result.budget_exhausted) {
      std::ofstream w(cfg.run_dir / ("warning_" + r + ".txt"));
      w << result.warning << '\n';
    }
  }
  return result;
}

}  // namespace aoiq::sac
