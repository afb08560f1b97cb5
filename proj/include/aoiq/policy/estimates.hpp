#pragma once

#include <memory>

#include "aoiq/estimator/estimator.hpp"
#include "aoiq/policy/policy.hpp"

namespace aoiq::policy {

/// X-hat = latest measurement.
class ZeroOrderHold final : public EstimateSource {
 public:
  void reset(const StateVector&) override {}
  StateVector estimate(const DecisionInput& in) override { return in.latest; }
  std::unique_ptr<EstimateSource> clone() const override { return std::make_unique<ZeroOrderHold>(*this); }
};

/// Constant-velocity extrapolation of the latest measurement.
class DeadReckoning final : public EstimateSource {
 public:
  explicit DeadReckoning(double slot_seconds = sim::kSlotSeconds) : dt_(slot_seconds) {}
  void reset(const StateVector&) override {}
  StateVector estimate(const DecisionInput& in) override {
    StateVector e = in.latest;
    e[0] += in.latest[2] * in.age_slots * dt_;
    e[1] += in.latest[3] * in.age_slots * dt_;
    return e;
  }
  std::unique_ptr<EstimateSource> clone() const override { return std::make_unique<DeadReckoning>(*this); }

 private:
  double dt_;
};

/// The recurrent estimator network with episode-local state.
class NeuralEstimate final : public EstimateSource {
 public:
  explicit NeuralEstimate(std::shared_ptr<const estimator::EstimatorModel> model,
                          estimator::SequenceReplay* record_into = nullptr)
      : runner_(std::move(model)) {
    runner_.record_into(record_into);
  }
  void reset(const StateVector& first) override { runner_.reset(first); }
  StateVector estimate(const DecisionInput& in) override { return runner_.estimate(in.age_slots, in.latest, in.truth); }
  std::unique_ptr<EstimateSource> clone() const override {
    auto copy = std::make_unique<NeuralEstimate>(*this);
    copy->runner_.record_into(nullptr);
    return copy;
  }
  const estimator::EstimatorRunner& runner() const { return runner_; }

 private:
  estimator::EstimatorRunner runner_;
};

}  // namespace aoiq::policy
