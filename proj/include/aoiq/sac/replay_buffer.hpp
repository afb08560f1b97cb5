#pragma once

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/nn/tensor.hpp"

namespace aoiq::sac {

/// One n-step replay record.
struct Transition {
  std::vector<double> obs;
  int action = 0;
  double n_step_return = 0.0;
  std::vector<double> obs_after_n;
  int n_used = 1;
  double discount = 1.0;  // gamma^n_used
  bool terminal = false;
};

/// Column-major batch: observations are obs_dim x batch.
struct TransitionBatch {
  nn::Matrix<double> obs;
  std::vector<int> actions;
  Eigen::VectorXd returns;
  nn::Matrix<double> obs_after;
  Eigen::VectorXd discounts;
  std::vector<bool> terminal;

  Eigen::Index size() const { return obs.cols(); }
};

/// Fixed-capacity ring of transitions with oldest-first eviction and uniform
/// sampling. push() may be called from several rollout threads.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim) : capacity_(capacity), obs_dim_(obs_dim) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    if (obs_dim <= 0) throw std::invalid_argument("replay observation dimension must be positive");
  }

  void push(const Transition& t) {
    if (static_cast<int>(t.obs.size()) != obs_dim_ || static_cast<int>(t.obs_after_n.size()) != obs_dim_)
      throw nn::ShapeError("replay push: observation dimension mismatch");
    if (t.action != 0 && t.action != 1) throw std::invalid_argument("replay push: action must be 0 or 1");
    std::lock_guard lock(mutex_);
    std::size_t slot;
    if (records_.size() < capacity_) {
      slot = records_.size();
      records_.push_back({});
      obs_.resize(obs_.size() + 2 * static_cast<std::size_t>(obs_dim_));
    } else {
      slot = head_;
      head_ = (head_ + 1) % capacity_;
    }
    Record& r = records_[slot];
    r.action = static_cast<std::int8_t>(t.action);
    r.terminal = t.terminal;
    r.n_used = t.n_used;
    r.n_step_return = t.n_step_return;
    r.discount = t.discount;
    double* o = &obs_[slot * 2 * static_cast<std::size_t>(obs_dim_)];
    for (int k = 0; k < obs_dim_; ++k) {
      o[k] = t.obs[static_cast<std::size_t>(k)];
      o[obs_dim_ + k] = t.obs_after_n[static_cast<std::size_t>(k)];
    }
    ++pushed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }
  std::size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }
  std::uint64_t total_pushed() const {
    std::lock_guard lock(mutex_);
    return pushed_;
  }

  /// Logical index 0 is the oldest stored transition.
  Transition at(std::size_t logical) const {
    std::lock_guard lock(mutex_);
    if (logical >= records_.size()) throw std::out_of_range("replay index out of range");
    return unpack(physical(logical));
  }

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    std::lock_guard lock(mutex_);
    if (records_.empty()) throw std::logic_error("sampling from an empty replay buffer");
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.index(records_.size());
    return idx;
  }

  TransitionBatch sample(std::size_t batch, Rng& rng) const {
    const auto idx = sample_indices(batch, rng);
    std::lock_guard lock(mutex_);
    TransitionBatch b;
    const auto B = static_cast<Eigen::Index>(batch);
    b.obs.resize(obs_dim_, B);
    b.obs_after.resize(obs_dim_, B);
    b.returns.resize(B);
    b.discounts.resize(B);
    b.actions.resize(batch);
    b.terminal.resize(batch);
    for (Eigen::Index j = 0; j < B; ++j) {
      const std::size_t s = idx[static_cast<std::size_t>(j)];
      const Record& r = records_[s];
      const double* o = &obs_[s * 2 * static_cast<std::size_t>(obs_dim_)];
      for (int k = 0; k < obs_dim_; ++k) {
        b.obs(k, j) = o[k];
        b.obs_after(k, j) = o[obs_dim_ + k];
      }
      b.actions[static_cast<std::size_t>(j)] = r.action;
      b.returns[j] = r.n_step_return;
      b.discounts[j] = r.discount;
      b.terminal[static_cast<std::size_t>(j)] = r.terminal;
    }
    return b;
  }

 private:
  struct Record {
    double n_step_return = 0.0;
    double discount = 1.0;
    std::int32_t n_used = 1;
    std::int8_t action = 0;
    bool terminal = false;
  };

  std::size_t physical(std::size_t logical) const {
    return records_.size() < capacity_ ? logical : (head_ + logical) % capacity_;
  }

  Transition unpack(std::size_t s) const {
    const Record& r = records_[s];
    const double* o = &obs_[s * 2 * static_cast<std::size_t>(obs_dim_)];
    Transition t;
    t.obs.assign(o, o + obs_dim_);
    t.obs_after_n.assign(o + obs_dim_, o + 2 * obs_dim_);
    t.action = r.action;
    t.n_step_return = r.n_step_return;
    t.n_used = r.n_used;
    t.discount = r.discount;
    t.terminal = r.terminal;
    return t;
  }

  std::size_t capacity_;
  int obs_dim_;
  mutable std::mutex mutex_;
  std::vector<Record> records_;
  std::vector<double> obs_;
  std::size_t head_ = 0;  // oldest record once full
  std::uint64_t pushed_ = 0;
};

}  // namespace aoiq::sac
