#pragma once

#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "aoiq/policy/baselines.hpp"
#include "aoiq/policy/estimates.hpp"
#include "aoiq/policy/qnet.hpp"

namespace aoiq::policy {

/// Whitespace-separated key=value pairs, e.g. "kind=threshold delta=0.5".
using PolicySpec = std::map<std::string, std::string>;

inline PolicySpec parse_policy_spec(const std::string& text) {
  PolicySpec spec;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == token.size())
      throw std::invalid_argument("policy spec token '" + token + "' is not key=value");
    if (!spec.emplace(token.substr(0, eq), token.substr(eq + 1)).second)
      throw std::invalid_argument("policy spec repeats key '" + token.substr(0, eq) + "'");
  }
  if (!spec.count("kind")) throw std::invalid_argument("policy spec needs kind=...");
  return spec;
}

namespace detail {

inline const std::string& required(const PolicySpec& s, const std::string& key) {
  auto it = s.find(key);
  if (it == s.end()) throw std::invalid_argument("policy kind " + s.at("kind") + " needs " + key + "=...");
  return it->second;
}

inline double parse_number(const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("'" + v + "' is not a number");
  return x;
}

inline void reject_unknown(const PolicySpec& s, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : s) {
    if (k == "kind") continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument("policy kind " + s.at("kind") + " does not take " + k + "=");
  }
}

// estimator=dead_reckoning (default) | zero_order_hold | <checkpoint path>
inline std::unique_ptr<EstimateSource> make_estimate_source(const PolicySpec& s) {
  auto it = s.find("estimator");
  if (it == s.end() || it->second == "dead_reckoning") return std::make_unique<DeadReckoning>();
  if (it->second == "zero_order_hold") return std::make_unique<ZeroOrderHold>();
  return std::make_unique<NeuralEstimate>(
      std::make_shared<estimator::EstimatorModel>(estimator::EstimatorModel::load(it->second)));
}

}  // namespace detail

/// Builds a policy from its spec. Kinds: always, never, bernoulli (p),
/// threshold (delta), sigmoid (variant, n_agents), qnet (checkpoint, mode),
/// qnet-ensemble (low, mid, high).
inline PolicyHandle make_policy(const PolicySpec& s) {
  const std::string& kind = s.at("kind");
  if (kind == "always") {
    detail::reject_unknown(s, {"estimator"});
    return std::make_unique<AlwaysQuery>(detail::make_estimate_source(s));
  }
  if (kind == "never") {
    detail::reject_unknown(s, {"estimator"});
    return std::make_unique<NeverQuery>(detail::make_estimate_source(s));
  }
  if (kind == "bernoulli") {
    detail::reject_unknown(s, {"estimator", "p"});
    return std::make_unique<BernoulliQuery>(detail::parse_number(detail::required(s, "p")),
                                            detail::make_estimate_source(s));
  }
  if (kind == "threshold") {
    detail::reject_unknown(s, {"estimator", "delta"});
    return std::make_unique<ThresholdQuery>(detail::parse_number(detail::required(s, "delta")),
                                            detail::make_estimate_source(s));
  }
  if (kind == "sigmoid") {
    detail::reject_unknown(s, {"estimator", "variant", "n_agents"});
    const auto n = static_cast<int>(detail::parse_number(detail::required(s, "n_agents")));
    return std::make_unique<SigmoidQuery>(sigmoid_variant_from_string(detail::required(s, "variant")), n,
                                          detail::make_estimate_source(s));
  }
  if (kind == "qnet") {
    detail::reject_unknown(s, {"checkpoint", "mode"});
    const QNetMode mode = s.count("mode") ? qnet_mode_from_string(s.at("mode")) : QNetMode::sample;
    return std::make_unique<QNetPolicy>(QNetModel::load(detail::required(s, "checkpoint")), mode);
  }
  if (kind == "qnet-ensemble") {
    detail::reject_unknown(s, {"low", "mid", "high"});
    std::vector<QNetModel> models;
    for (const char* key : {"low", "mid", "high"}) models.push_back(QNetModel::load(detail::required(s, key)));
    return std::make_unique<QNetEnsemble>(std::move(models));
  }
  throw std::invalid_argument("unknown policy kind '" + kind + "'");
}

inline PolicyHandle make_policy(const std::string& text) { return make_policy(parse_policy_spec(text)); }

}  // namespace aoiq::policy
