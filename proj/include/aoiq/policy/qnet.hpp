#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aoiq/core/format.hpp"
#include "aoiq/estimator/estimator.hpp"
#include "aoiq/nn/checkpoint.hpp"
#include "aoiq/policy/observation.hpp"
#include "aoiq/policy/policy.hpp"
#include "aoiq/sac/learner.hpp"

namespace aoiq::policy {

/// Estimator plus actor/critic trained together for one q range.
struct QNetModel {
  std::shared_ptr<estimator::EstimatorModel> estimator;
  std::shared_ptr<sac::SacLearner> learner;
  ObservationLayout layout = ObservationLayout::estimate_and_age;
  ObservationScaling scaling{};
  std::string range = "one";

  static QNetModel create(const sac::SacHyper& hyper, const estimator::EstimatorConfig& est_cfg,
                          ObservationLayout layout, std::string range, std::uint64_t seed) {
    QNetModel m;
    m.estimator = std::make_shared<estimator::EstimatorModel>(est_cfg, derive_seed(seed, 1));
    m.learner = std::make_shared<sac::SacLearner>(observation_dim(layout), hyper, derive_seed(seed, 2));
    m.layout = layout;
    m.range = std::move(range);
    return m;
  }

  nn::Checkpoint to_checkpoint() const {
    nn::Checkpoint ckpt;
    nn::CheckpointSection meta;
    meta.name = "meta";
    const auto& h = learner->hyper();
    meta.attributes = {{"layout", to_string(layout)},
                       {"range", range},
                       {"n_step", std::to_string(h.n_step)},
                       {"target_entropy", format_double(h.target_entropy)},
                       {"q_low", format_double(h.q_low)},
                       {"q_high", format_double(h.q_high)},
                       {"hidden_width", std::to_string(h.hidden_width)},
                       {"gamma", format_double(h.gamma)}};
    ckpt.sections.push_back(std::move(meta));
    ckpt.sections.push_back(estimator->to_section());
    learner->append_sections(ckpt.sections);
    return ckpt;
  }

  void save(const std::filesystem::path& path) const { nn::save_checkpoint(to_checkpoint(), path); }

  static QNetModel from_checkpoint(const nn::Checkpoint& ckpt) {
    const auto& meta = ckpt.section("meta");
    QNetModel m;
    m.layout = observation_layout_from_string(meta.attribute("layout"));
    m.range = meta.attribute("range");
    sac::SacHyper h = sac::hyper_for(sac::range_from_string(m.range));
    h.n_step = std::stoi(meta.attribute("n_step"));
    h.target_entropy = std::stod(meta.attribute("target_entropy"));
    h.q_low = std::stod(meta.attribute("q_low"));
    h.q_high = std::stod(meta.attribute("q_high"));
    h.hidden_width = std::stoi(meta.attribute("hidden_width"));
    h.gamma = std::stod(meta.attribute("gamma"));
    m.estimator = std::make_shared<estimator::EstimatorModel>(
        estimator::EstimatorModel::from_section(ckpt.section("estimator")));
    m.learner = std::make_shared<sac::SacLearner>(observation_dim(m.layout), h, 0);
    m.learner->restore_sections(ckpt);
    return m;
  }

  static QNetModel load(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)); }
};

/// Per-agent QNet state shared by the single and ensemble policies.
class QNetAgent {
 public:
  explicit QNetAgent(QNetModel model, estimator::SequenceReplay* record_into = nullptr)
      : model_(std::move(model)), runner_(model_.estimator) {
    runner_.record_into(record_into);
  }

  void reset(const StateVector& first) {
    runner_.reset(first);
    backlog_.reset();
    since_response_ = 0.0;
    last_interarrival_ = 0.0;
  }

  /// Advances the estimator and rebuilds the observation.
  const StateVector& observe(const DecisionInput& in) {
    estimate_ = runner_.estimate(in.age_slots, in.latest, in.truth);
    since_response_ += 1.0;
    if (in.response_arrived) {
      last_interarrival_ = since_response_;
      since_response_ = 0.0;
    }
    backlog_.update(false, in.response_arrived);
    assemble_observation(model_.layout, estimate_, in.latest, in.age_slots,
                         {backlog_.value(), last_interarrival_}, model_.scaling, obs_);
    return estimate_;
  }

  void note_action(int action) { backlog_.update(action == 1, false); }

  Eigen::Map<const Eigen::VectorXd> obs_vector() const {
    return {obs_.data(), static_cast<Eigen::Index>(obs_.size())};
  }
  std::span<const double> observation() const { return obs_; }
  const StateVector& last_estimate() const { return estimate_; }
  const QNetModel& model() const { return model_; }
  void record_into(estimator::SequenceReplay* r) { runner_.record_into(r); }

 private:
  QNetModel model_;
  estimator::EstimatorRunner runner_;
  BacklogCounter backlog_;
  double since_response_ = 0.0;
  double last_interarrival_ = 0.0;
  StateVector estimate_ = StateVector::Zero();
  std::vector<double> obs_;
};

enum class QNetMode {
  sample,  // draw from the actor
  greedy   // argmax of the critic, ties to no-query
};

inline QNetMode qnet_mode_from_string(const std::string& s) {
  if (s == "sample") return QNetMode::sample;
  if (s == "greedy") return QNetMode::greedy;
  throw std::invalid_argument("unknown qnet mode '" + s + "'");
}

inline std::string to_string(QNetMode m) { return m == QNetMode::sample ? "sample" : "greedy"; }

class QNetPolicy final : public Policy {
 public:
  QNetPolicy(QNetModel model, QNetMode mode = QNetMode::sample, estimator::SequenceReplay* record_into = nullptr)
      : agent_(std::move(model), record_into), mode_(mode) {}
  QNetPolicy(const QNetPolicy& other) : Policy(other), agent_(other.agent_), mode_(other.mode_), rng_(other.rng_) {
    agent_.record_into(nullptr);
  }

  void reset(const StateVector& first, std::uint64_t seed) override {
    agent_.reset(first);
    rng_ = Rng(seed);
  }

  StateVector estimate(const DecisionInput& in) override { return agent_.observe(in); }

  int act(const DecisionInput&) override {
    const auto& learner = *agent_.model().learner;
    int a = 0;
    if (mode_ == QNetMode::sample) {
      a = learner.sample_action(agent_.obs_vector(), rng_);
    } else {
      const Eigen::Vector2d q = learner.q_values(agent_.obs_vector());
      a = q[1] > q[0] ? 1 : 0;
    }
    agent_.note_action(a);
    return a;
  }

  std::span<const double> observation() const override { return agent_.observation(); }
  std::string name() const override { return "qnet range=" + agent_.model().range + " mode=" + to_string(mode_); }
  PolicyHandle clone() const override { return std::make_unique<QNetPolicy>(*this); }
  const QNetAgent& agent() const { return agent_; }

 private:
  QNetAgent agent_;
  QNetMode mode_;
  Rng rng_;
};

/// Winner of the max over all (model, action) Q-values. Ties between the two
/// actions resolve to 0 (no query); ties across models resolve to the lowest
/// model index.
struct EnsembleChoice {
  int action = 0;
  int model = 0;
};

inline EnsembleChoice ensemble_argmax(std::span<const Eigen::Vector2d> q) {
  if (q.empty()) throw std::invalid_argument("ensemble_argmax: no models");
  EnsembleChoice best{0, 0};
  double best_q = q[0][0];
  for (std::size_t m = 0; m < q.size(); ++m)
    for (int a = 0; a < 2; ++a) {
      const double v = q[m][a];
      if (v > best_q) {
        best_q = v;
        best = {a, static_cast<int>(m)};
      }
    }
  // Any no-query entry equal to the maximum wins the tie.
  if (best.action == 1)
    for (std::size_t m = 0; m < q.size(); ++m)
      if (q[m][0] == best_q) return {0, static_cast<int>(m)};
  return best;
}

/// Three range-specialised agents; acts by the max over their six Q-values and
/// reports the winning model's estimate.
class QNetEnsemble final : public Policy {
 public:
  explicit QNetEnsemble(std::vector<QNetModel> models) {
    if (models.empty()) throw std::invalid_argument("ensemble needs at least one model");
    for (auto& m : models) agents_.emplace_back(std::move(m));
  }

  void reset(const StateVector& first, std::uint64_t) override {
    for (auto& a : agents_) a.reset(first);
    choice_ = {};
  }

  // Q-values depend only on the current estimates, so the decision is made here.
  StateVector estimate(const DecisionInput& in) override {
    q_.clear();
    for (auto& a : agents_) {
      a.observe(in);
      q_.push_back(a.model().learner->q_values(a.obs_vector()));
    }
    choice_ = ensemble_argmax(q_);
    return agents_[static_cast<std::size_t>(choice_.model)].last_estimate();
  }

  int act(const DecisionInput&) override {
    for (auto& a : agents_) a.note_action(choice_.action);
    return choice_.action;
  }

  std::span<const double> observation() const override {
    return agents_[static_cast<std::size_t>(choice_.model)].observation();
  }
  std::string name() const override { return "qnet-ensemble"; }
  PolicyHandle clone() const override { return std::make_unique<QNetEnsemble>(*this); }
  const EnsembleChoice& last_choice() const { return choice_; }
  std::span<const Eigen::Vector2d> last_q_values() const { return q_; }

 private:
  std::vector<QNetAgent> agents_;
  std::vector<Eigen::Vector2d> q_;
  EnsembleChoice choice_;
};

}  // namespace aoiq::policy
