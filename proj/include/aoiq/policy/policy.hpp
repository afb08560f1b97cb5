#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "aoiq/sim/source.hpp"

namespace aoiq::policy {

using sim::StateVector;

/// Everything an agent knows at a decision instant, plus ground truth for the
/// evaluation-only oracle baselines.
struct DecisionInput {
  double age_slots = 0.0;
  StateVector latest = StateVector::Zero();
  const StateVector* truth = nullptr;
  bool response_arrived = false;  // some response reached the agent since the previous decision
};

/// Produces X-hat at every decision instant.
class EstimateSource {
 public:
  virtual ~EstimateSource() = default;
  virtual void reset(const StateVector& first_measurement) = 0;
  virtual StateVector estimate(const DecisionInput& in) = 0;
  virtual std::unique_ptr<EstimateSource> clone() const = 0;
};

/// A querying policy. Per decision instant the caller invokes estimate()
/// exactly once and then act(); the action is 1 (query) or 0.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const StateVector& first_measurement, std::uint64_t seed) = 0;
  virtual StateVector estimate(const DecisionInput& in) = 0;
  virtual int act(const DecisionInput& in) = 0;
  /// Feature vector behind the latest action (learning policies only).
  virtual std::span<const double> observation() const { return {}; }
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;
};

using PolicyHandle = std::unique_ptr<Policy>;

}  // namespace aoiq::policy
