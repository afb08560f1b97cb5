#pragma once

#include <array>
#include <vector>

#include "aoiq/policy/qnet.hpp"

namespace aoiq::oracle {

// A QNet model whose critic ignores its input and returns (q0, q1).
inline policy::QNetModel constant_critic_model(double q0, double q1, std::uint64_t seed = 1) {
  sac::SacHyper h = sac::hyper_for(sac::RangeId::high);
  h.hidden_width = 4;
  estimator::EstimatorConfig e;
  e.recurrent_width = 4;
  e.fc_width = 4;
  auto m = policy::QNetModel::create(h, e, policy::ObservationLayout::estimate_and_age, "high", seed);
  for (auto& l : m.learner->critic().layers()) {
    l.weight.value.setZero();
    l.bias.value.setZero();
  }
  auto& out = m.learner->critic().layers().back().bias.value;
  out(0, 0) = static_cast<float>(q0);
  out(1, 0) = static_cast<float>(q1);
  return m;
}

// Independent statement of the rule: action 0 if any no-query value attains
// the maximum of all six, else 1.
inline int expected_ensemble_action(const std::array<double, 6>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  for (int m = 0; m < 3; ++m)
    if (v[static_cast<std::size_t>(2 * m)] == mx) return 0;
  return 1;
}

struct EnsembleSweep {
  int cases = 0;
  int mismatches = 0;
};

// Every assignment of three distinct levels to the six (model, action) slots
// that uses all three levels, driven through the full ensemble policy.
inline EnsembleSweep sweep_ensemble_orderings() {
  const std::array<double, 3> levels{-1.5, 0.25, 2.0};
  EnsembleSweep out;
  for (int code = 0; code < 729; ++code) {
    std::array<double, 6> v{};
    std::array<bool, 3> used{};
    int c = code;
    for (auto& x : v) {
      used[static_cast<std::size_t>(c % 3)] = true;
      x = levels[static_cast<std::size_t>(c % 3)];
      c /= 3;
    }
    if (!(used[0] && used[1] && used[2])) continue;
    std::vector<policy::QNetModel> models;
    for (int m = 0; m < 3; ++m) models.push_back(constant_critic_model(v[2 * m], v[2 * m + 1]));
    policy::QNetEnsemble ens(std::move(models));
    const sim::StateVector x0 = sim::StateVector::Zero();
    ens.reset(x0, 1);
    const policy::DecisionInput in{3.0, x0, nullptr, false};
    ens.estimate(in);
    ++out.cases;
    if (ens.act(in) != expected_ensemble_action(v)) ++out.mismatches;
  }
  return out;
}

}  // namespace aoiq::oracle
