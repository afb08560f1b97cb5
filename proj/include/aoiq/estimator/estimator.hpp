#pragma once

#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "aoiq/core/format.hpp"
#include "aoiq/core/random.hpp"
#include "aoiq/nn/adam.hpp"
#include "aoiq/nn/checkpoint.hpp"
#include "aoiq/nn/dense.hpp"
#include "aoiq/nn/lstm.hpp"
#include "aoiq/sim/source.hpp"

namespace aoiq::estimator {

using Real = double;
using sim::StateVector;
using Mat = nn::Matrix<Real>;

struct EstimatorConfig {
  int recurrent_width = 64;
  int fc_width = 64;
  double age_scale = 100.0;
  double position_scale = 10.0;
  double velocity_scale = 10.0;
  double slot_seconds = sim::kSlotSeconds;
  double learning_rate = 1e-4;
  double grad_clip = 10.0;
  int window = 64;  // truncated BPTT length
};

/// What the estimator sees at one decision instant.
struct EstimatorInput {
  StateVector prev_estimate = StateVector::Zero();
  double age_slots = 0.0;
  StateVector latest_measurement = StateVector::Zero();
};

// Features are expressed relative to the latest measurement so the model is
// translation invariant:
//   0-1  (prev estimate - latest) position / position_scale
//   2-3  prev estimate velocity / velocity_scale
//   4    age / age_scale
//   5-6  latest velocity / velocity_scale
//   7-8  latest velocity * age (dead-reckoned displacement) / position_scale
inline constexpr int kFeatureDim = 9;
inline constexpr int kStateDim = 4;

inline void write_features(const EstimatorInput& in, const EstimatorConfig& cfg, Real* out) {
  if (!in.prev_estimate.allFinite() || !in.latest_measurement.allFinite() || !std::isfinite(in.age_slots))
    throw nn::NumericError("estimator input is not finite");
  if (in.age_slots < 0.0) throw std::invalid_argument("estimator input age is negative");
  const StateVector& p = in.prev_estimate;
  const StateVector& l = in.latest_measurement;
  const double elapsed = in.age_slots * cfg.slot_seconds;
  out[0] = (p[0] - l[0]) / cfg.position_scale;
  out[1] = (p[1] - l[1]) / cfg.position_scale;
  out[2] = p[2] / cfg.velocity_scale;
  out[3] = p[3] / cfg.velocity_scale;
  out[4] = in.age_slots / cfg.age_scale;
  out[5] = l[2] / cfg.velocity_scale;
  out[6] = l[3] / cfg.velocity_scale;
  out[7] = l[2] * elapsed / cfg.position_scale;
  out[8] = l[3] * elapsed / cfg.position_scale;
}

inline Eigen::Matrix<Real, kFeatureDim, 1> features(const EstimatorInput& in, const EstimatorConfig& cfg) {
  Eigen::Matrix<Real, kFeatureDim, 1> f;
  write_features(in, cfg, f.data());
  return f;
}

/// Constant-velocity extrapolation of the latest measurement; the network
/// output is a correction on top of it.
inline StateVector dead_reckoned(double age_slots, const StateVector& latest, const EstimatorConfig& cfg) {
  StateVector base = latest;
  base[0] += latest[2] * age_slots * cfg.slot_seconds;
  base[1] += latest[3] * age_slots * cfg.slot_seconds;
  return base;
}

/// Recurrent state carried across decision instants of one episode.
struct RecurrentState {
  nn::LstmState<Real> lstm;
  StateVector prev_estimate = StateVector::Zero();
};

/// Recurrent cell -> two relu layers -> linear head. The head also reads the
/// input features, and its output is an offset from the dead-reckoned latest
/// measurement in scaled units.
class EstimatorModel {
 public:
  explicit EstimatorModel(EstimatorConfig cfg = {}, std::uint64_t seed = 1)
      : cfg_(cfg),
        lstm_("estimator.lstm", kFeatureDim, cfg.recurrent_width),
        fc1_("estimator.fc0", cfg.recurrent_width, cfg.fc_width, nn::Activation::relu),
        fc2_("estimator.fc1", cfg.fc_width, cfg.fc_width, nn::Activation::relu),
        head_("estimator.head", cfg.fc_width + kFeatureDim, kStateDim, nn::Activation::identity),
        optimizer_(nn::AdamConfig{cfg.learning_rate}) {
    Rng rng(derive_seed(seed, 0xe57));
    lstm_.init(rng);
    fc1_.init_fan_in(rng);
    fc2_.init_fan_in(rng);
    head_.init_fan_in(rng);
    head_.weight.value *= 0.1;
    head_.bias.value.setZero();
  }

  const EstimatorConfig& config() const { return cfg_; }

  void zero_output_head() {
    head_.weight.value.setZero();
    head_.bias.value.setZero();
  }

  RecurrentState initial_state(const StateVector& first_measurement) const {
    return {nn::LstmState<Real>::zeros(cfg_.recurrent_width, 1), first_measurement};
  }

  /// One decision instant: returns the estimate and advances `state`.
  StateVector estimate(double age_slots, const StateVector& latest, RecurrentState& state) const {
    Mat x(kFeatureDim, 1);
    write_features({state.prev_estimate, age_slots, latest}, cfg_, x.data());
    state.lstm = lstm_.step(x, state.lstm);
    const Mat out = head_infer(state.lstm.h, x);
    StateVector est = dead_reckoned(age_slots, latest, cfg_) + scaled(out.col(0));
    state.prev_estimate = est;
    return est;
  }

  nn::ParameterList<Real> parameters() {
    nn::ParameterList<Real> out = lstm_.parameters();
    for (auto* p : fc1_.parameters()) out.push_back(p);
    for (auto* p : fc2_.parameters()) out.push_back(p);
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
  }

  nn::Adam<Real>& optimizer() { return optimizer_; }
  nn::Lstm<Real>& lstm() { return lstm_; }
  nn::Dense<Real>& fc1() { return fc1_; }
  nn::Dense<Real>& fc2() { return fc2_; }
  nn::Dense<Real>& head() { return head_; }

  nn::CheckpointSection to_section() {
    return nn::make_section<Real>("estimator", parameters(), &optimizer_,
                                  {{"input_dim", std::to_string(kFeatureDim)},
                                   {"output_dim", std::to_string(kStateDim)},
                                   {"recurrent_width", std::to_string(cfg_.recurrent_width)},
                                   {"fc_width", std::to_string(cfg_.fc_width)},
                                   {"age_scale", format_double(cfg_.age_scale)},
                                   {"position_scale", format_double(cfg_.position_scale)},
                                   {"velocity_scale", format_double(cfg_.velocity_scale)},
                                   {"slot_seconds", format_double(cfg_.slot_seconds)}});
  }

  static EstimatorModel from_section(const nn::CheckpointSection& s, EstimatorConfig base = {}) {
    base.recurrent_width = std::stoi(s.attribute("recurrent_width"));
    base.fc_width = std::stoi(s.attribute("fc_width"));
    base.age_scale = std::stod(s.attribute("age_scale"));
    base.position_scale = std::stod(s.attribute("position_scale"));
    base.velocity_scale = std::stod(s.attribute("velocity_scale"));
    base.slot_seconds = std::stod(s.attribute("slot_seconds"));
    EstimatorModel m(base);
    nn::restore_section<Real>(s, m.parameters(), &m.optimizer_);
    return m;
  }

  void save(const std::filesystem::path& path) {
    nn::Checkpoint c;
    c.sections.push_back(to_section());
    nn::save_checkpoint(c, path);
  }

  // Reads the estimator section of any checkpoint that has one.
  static EstimatorModel load(const std::filesystem::path& path) {
    return from_section(nn::load_checkpoint(path).section("estimator"));
  }

  // Head over the concatenation [fc output; features], no tape.
  Mat head_infer(const Mat& h, const Mat& x) const {
    const Mat a = fc2_.infer(fc1_.infer(h));
    Mat in(a.rows() + x.rows(), a.cols());
    in << a, x;
    return head_.infer(in);
  }

  StateVector scaled(const Eigen::Ref<const Eigen::VectorXd>& out) const {
    return {out[0] * cfg_.position_scale, out[1] * cfg_.position_scale, out[2] * cfg_.velocity_scale,
            out[3] * cfg_.velocity_scale};
  }

  StateVector scale_vector() const {
    return {cfg_.position_scale, cfg_.position_scale, cfg_.velocity_scale, cfg_.velocity_scale};
  }

 private:
  EstimatorConfig cfg_;
  nn::Lstm<Real> lstm_;
  nn::Dense<Real> fc1_, fc2_, head_;
  nn::Adam<Real> optimizer_;
};

/// A recorded stretch of one episode for truncated BPTT.
struct EstimatorWindow {
  struct Step {
    double age_slots = 0.0;
    StateVector latest = StateVector::Zero();
    StateVector truth = StateVector::Zero();
  };
  Eigen::VectorXd h0, c0;
  StateVector prev_estimate0 = StateVector::Zero();
  std::vector<Step> steps;
};

/// Ring of recent windows shared between rollouts and the learner.
class SequenceReplay {
 public:
  explicit SequenceReplay(std::size_t capacity = 512) : capacity_(capacity) {}

  void push(EstimatorWindow w) {
    std::lock_guard lock(mutex_);
    if (windows_.size() == capacity_) windows_.pop_front();
    windows_.push_back(std::move(w));
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return windows_.size();
  }

  std::vector<EstimatorWindow> sample(std::size_t batch, Rng& rng) const {
    std::lock_guard lock(mutex_);
    std::vector<EstimatorWindow> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(windows_[rng.index(windows_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<EstimatorWindow> windows_;
};

/// Episode-scoped driver of a shared model: owns the recurrent state and can
/// record fixed-length windows (with ground truth) into a SequenceReplay.
class EstimatorRunner {
 public:
  EstimatorRunner() = default;
  explicit EstimatorRunner(std::shared_ptr<const EstimatorModel> model) : model_(std::move(model)) {}

  void set_model(std::shared_ptr<const EstimatorModel> model) { model_ = std::move(model); }
  const EstimatorModel& model() const { return *model_; }
  void record_into(SequenceReplay* replay) { replay_ = replay; }

  void reset(const StateVector& first_measurement) {
    state_ = model_->initial_state(first_measurement);
    window_.steps.clear();
  }

  StateVector estimate(double age_slots, const StateVector& latest, const StateVector* truth = nullptr) {
    if (replay_ && truth) {
      if (window_.steps.empty()) {
        window_.h0 = state_.lstm.h.col(0);
        window_.c0 = state_.lstm.c.col(0);
        window_.prev_estimate0 = state_.prev_estimate;
      }
      window_.steps.push_back({age_slots, latest, *truth});
      if (static_cast<int>(window_.steps.size()) == model_->config().window) {
        replay_->push(window_);
        window_.steps.clear();
      }
    }
    return model_->estimate(age_slots, latest, state_);
  }

  const RecurrentState& state() const { return state_; }

 private:
  std::shared_ptr<const EstimatorModel> model_;
  RecurrentState state_;
  SequenceReplay* replay_ = nullptr;
  EstimatorWindow window_;
};

inline void require_window_state(const EstimatorWindow& w, Eigen::Index hidden) {
  if (w.h0.size() != hidden || w.c0.size() != hidden)
    throw nn::ShapeError("estimator window: initial state does not match recurrent width");
}

/// Closed-loop truncated-BPTT pass over a batch of equal-length windows.
/// The fed-back previous estimate is treated as data (no gradient through it).
/// Overwrites the parameter gradients and returns the mean squared error per
/// state component.
inline double estimator_loss_and_gradients(EstimatorModel& model, std::span<const EstimatorWindow> batch) {
  if (batch.empty()) throw std::invalid_argument("estimator_train_step: empty batch");
  const std::size_t T = batch.front().steps.size();
  if (T == 0) throw std::invalid_argument("estimator_train_step: empty window");
  for (const auto& w : batch)
    if (w.steps.size() != T) throw nn::ShapeError("estimator_train_step: windows differ in length");
  const auto& cfg = model.config();
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index H = cfg.recurrent_width;

  const auto params = model.parameters();
  nn::zero_grad(params);
  auto& lstm = model.lstm();
  lstm.clear_tape();

  nn::LstmState<Real> state{Mat(H, B), Mat(H, B)};
  Mat prev(kStateDim, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& w = batch[static_cast<std::size_t>(b)];
    require_window_state(w, H);
    state.h.col(b) = w.h0;
    state.c.col(b) = w.c0;
    prev.col(b) = w.prev_estimate0;
  }

  const Eigen::Index N = static_cast<Eigen::Index>(T) * B;
  Mat xs(kFeatureDim, N), hs(H, N), base(kStateDim, N), truth(kStateDim, N);
  for (std::size_t t = 0; t < T; ++t) {
    Mat x(kFeatureDim, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& step = batch[static_cast<std::size_t>(b)].steps[t];
      write_features({prev.col(b), step.age_slots, step.latest}, cfg, x.col(b).data());
      base.col(static_cast<Eigen::Index>(t) * B + b) = dead_reckoned(step.age_slots, step.latest, cfg);
      truth.col(static_cast<Eigen::Index>(t) * B + b) = step.truth;
    }
    state = lstm.forward_step(x, state);
    const Mat out = model.head_infer(state.h, x);
    for (Eigen::Index b = 0; b < B; ++b)
      prev.col(b) = base.col(static_cast<Eigen::Index>(t) * B + b) + model.scaled(out.col(b));
    xs.middleCols(static_cast<Eigen::Index>(t) * B, B) = x;
    hs.middleCols(static_cast<Eigen::Index>(t) * B, B) = state.h;
  }

  // Batched pass over every recorded step with tape.
  const Mat a1 = model.fc1().forward(hs);
  const Mat a2 = model.fc2().forward(a1);
  Mat head_in(a2.rows() + kFeatureDim, N);
  head_in << a2, xs;
  const Mat out = model.head().forward(head_in);
  const StateVector scale = model.scale_vector();
  Mat diff = base + scale.asDiagonal() * out - truth;
  const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
  if (!std::isfinite(loss)) throw nn::NumericError("estimator loss is not finite");
  Mat d_out = scale.asDiagonal() * diff * (2.0 / static_cast<double>(diff.size()));
  const Mat d_head_in = model.head().backward(d_out);
  const Mat d_a1 = model.fc2().backward(d_head_in.topRows(a2.rows()));
  const Mat d_h = model.fc1().backward(d_a1);
  std::vector<Mat> dhs(T);
  for (std::size_t t = 0; t < T; ++t) dhs[t] = d_h.middleCols(static_cast<Eigen::Index>(t) * B, B);
  lstm.backward_sequence(dhs);
  lstm.clear_tape();
  return loss;
}

/// One clipped Adam update; returns the pre-update loss.
inline double estimator_train_step(EstimatorModel& model, std::span<const EstimatorWindow> batch) {
  const double loss = estimator_loss_and_gradients(model, batch);
  const auto params = model.parameters();
  nn::clip_grad_norm(params, model.config().grad_clip);
  model.optimizer().step(params);
  return loss;
}

}  // namespace aoiq::estimator
