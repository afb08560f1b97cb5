#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "aoiq/core/random.hpp"
#include "aoiq/policy/estimates.hpp"
#include "aoiq/policy/policy.hpp"

namespace aoiq::policy {

/// Shared plumbing for policies that delegate estimation to an EstimateSource.
class EstimatingPolicy : public Policy {
 public:
  explicit EstimatingPolicy(std::unique_ptr<EstimateSource> est = nullptr)
      : est_(est ? std::move(est) : std::make_unique<DeadReckoning>()) {}
  EstimatingPolicy(const EstimatingPolicy& other) : Policy(other), est_(other.est_->clone()), last_(other.last_), rng_(other.rng_) {}

  void reset(const StateVector& first, std::uint64_t seed) override {
    est_->reset(first);
    rng_ = Rng(seed);
    last_ = first;
  }

  StateVector estimate(const DecisionInput& in) override { return last_ = est_->estimate(in); }

 protected:
  // Position error of the current estimate against ground truth.
  double position_error(const DecisionInput& in) const {
    if (!in.truth) throw std::logic_error(name() + " needs ground truth; it is an evaluation-only oracle");
    return (last_.head<2>() - in.truth->head<2>()).norm();
  }

  std::unique_ptr<EstimateSource> est_;
  StateVector last_ = StateVector::Zero();
  Rng rng_;
};

class AlwaysQuery final : public EstimatingPolicy {
 public:
  using EstimatingPolicy::EstimatingPolicy;
  int act(const DecisionInput&) override { return 1; }
  std::string name() const override { return "always"; }
  PolicyHandle clone() const override { return std::make_unique<AlwaysQuery>(*this); }
};

class NeverQuery final : public EstimatingPolicy {
 public:
  using EstimatingPolicy::EstimatingPolicy;
  int act(const DecisionInput&) override { return 0; }
  std::string name() const override { return "never"; }
  PolicyHandle clone() const override { return std::make_unique<NeverQuery>(*this); }
};

/// Queries i.i.d. with a fixed probability (used for estimator pre-training).
class BernoulliQuery final : public EstimatingPolicy {
 public:
  BernoulliQuery(double p, std::unique_ptr<EstimateSource> est = nullptr) : EstimatingPolicy(std::move(est)), p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("query probability must lie in [0, 1]");
  }
  int act(const DecisionInput&) override { return rng_.bernoulli(p_) ? 1 : 0; }
  std::string name() const override { return "bernoulli p=" + std::to_string(p_); }
  PolicyHandle clone() const override { return std::make_unique<BernoulliQuery>(*this); }
  void set_probability(double p) { p_ = p; }

 private:
  double p_;
};

/// Queries when the true position error strictly exceeds delta.
class ThresholdQuery final : public EstimatingPolicy {
 public:
  ThresholdQuery(double delta, std::unique_ptr<EstimateSource> est = nullptr)
      : EstimatingPolicy(std::move(est)), delta_(delta) {}
  int act(const DecisionInput& in) override { return threshold_act(position_error(in), delta_); }
  static int threshold_act(double err, double delta) { return err > delta ? 1 : 0; }
  std::string name() const override { return "threshold delta=" + std::to_string(delta_); }
  PolicyHandle clone() const override { return std::make_unique<ThresholdQuery>(*this); }

 private:
  double delta_;
};

enum class SigmoidVariant { er, er_over_n, half_er_over_n, third_er_over_n };

inline SigmoidVariant sigmoid_variant_from_string(const std::string& s) {
  if (s == "er") return SigmoidVariant::er;
  if (s == "er_over_n") return SigmoidVariant::er_over_n;
  if (s == "half_er_over_n") return SigmoidVariant::half_er_over_n;
  if (s == "third_er_over_n") return SigmoidVariant::third_er_over_n;
  throw std::invalid_argument("unknown sigmoid variant '" + s + "'");
}

inline std::string to_string(SigmoidVariant v) {
  switch (v) {
    case SigmoidVariant::er: return "er";
    case SigmoidVariant::er_over_n: return "er_over_n";
    case SigmoidVariant::half_er_over_n: return "half_er_over_n";
    case SigmoidVariant::third_er_over_n: return "third_er_over_n";
  }
  throw std::invalid_argument("unknown sigmoid variant");
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Query probability sigma(scale * e_r) for the variant; N is the number of agents.
inline double sigmoid_query_probability(double err, int n_agents, SigmoidVariant v) {
  if (n_agents < 1) throw std::invalid_argument("number of agents must be >= 1");
  const double n = static_cast<double>(n_agents);
  switch (v) {
    case SigmoidVariant::er: return sigmoid(err);
    case SigmoidVariant::er_over_n: return sigmoid(err / n);
    case SigmoidVariant::half_er_over_n: return sigmoid(0.5 * err / n);
    case SigmoidVariant::third_er_over_n: return sigmoid(0.33 * err / n);
  }
  throw std::invalid_argument("unknown sigmoid variant");
}

class SigmoidQuery final : public EstimatingPolicy {
 public:
  SigmoidQuery(SigmoidVariant v, int n_agents, std::unique_ptr<EstimateSource> est = nullptr)
      : EstimatingPolicy(std::move(est)), variant_(v), n_agents_(n_agents) {
    if (n_agents < 1) throw std::invalid_argument("number of agents must be >= 1");
  }
  int act(const DecisionInput& in) override {
    return rng_.bernoulli(sigmoid_query_probability(position_error(in), n_agents_, variant_)) ? 1 : 0;
  }
  std::string name() const override { return "sigmoid variant=" + to_string(variant_) + " n_agents=" + std::to_string(n_agents_); }
  PolicyHandle clone() const override { return std::make_unique<SigmoidQuery>(*this); }

 private:
  SigmoidVariant variant_;
  int n_agents_;
};

}  // namespace aoiq::policy
