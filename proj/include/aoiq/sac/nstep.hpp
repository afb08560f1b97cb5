#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoiq/sac/replay_buffer.hpp"
#include "aoiq/sim/episode.hpp"

namespace aoiq::sac {

/// sum_k gamma^k r_k + gamma^len * bootstrap (bootstrap dropped when terminal).
inline double nstep_fold(std::span<const double> rewards, double bootstrap, double gamma, bool terminal = false) {
  if (rewards.empty()) throw std::invalid_argument("nstep_fold: empty reward list");
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  if (!terminal) total += discount * bootstrap;
  return total;
}

/// Turns the per-slot stream of one episode into n-step transitions. Near the
/// end of an episode the window is truncated and marked terminal.
class NStepAccumulator : public sim::TransitionSink {
 public:
  using Emit = std::function<void(Transition&&)>;

  NStepAccumulator(int n, double gamma, Emit emit) : n_(n), gamma_(gamma), emit_(std::move(emit)) {
    if (n < 1) throw std::invalid_argument("n-step length must be >= 1");
  }

  void on_slot(const sim::SlotRecord& rec) override {
    if (static_cast<int>(pending_.size()) == n_) {
      emit_front(rec.observation, n_, false);
      pending_.pop_front();
    }
    pending_.push_back({std::vector<double>(rec.observation.begin(), rec.observation.end()), rec.action, rec.reward});
    if (rec.terminal) {
      while (!pending_.empty()) {
        emit_front(rec.observation, static_cast<int>(pending_.size()), true);
        pending_.pop_front();
      }
    }
  }

  void on_episode_end() override { pending_.clear(); }

  int n() const { return n_; }

 private:
  struct Pending {
    std::vector<double> obs;
    int action;
    double reward;
  };

  void emit_front(std::span<const double> obs_after, int used, bool terminal) {
    rewards_.clear();
    for (int k = 0; k < used; ++k) rewards_.push_back(pending_[static_cast<std::size_t>(k)].reward);
    Transition t;
    t.obs = pending_.front().obs;
    t.action = pending_.front().action;
    t.n_step_return = nstep_fold(rewards_, 0.0, gamma_, true);
    t.obs_after_n.assign(obs_after.begin(), obs_after.end());
    t.n_used = used;
    t.discount = std::pow(gamma_, used);
    t.terminal = terminal;
    emit_(std::move(t));
  }

  int n_;
  double gamma_;
  Emit emit_;
  std::deque<Pending> pending_;
  std::vector<double> rewards_;
};

}  // namespace aoiq::sac
