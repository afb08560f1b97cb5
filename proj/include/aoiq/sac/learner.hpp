#pragma once

#include <cmath>
#include <map>
#include <string>

#include "aoiq/core/random.hpp"
#include "aoiq/nn/adam.hpp"
#include "aoiq/nn/checkpoint.hpp"
#include "aoiq/nn/dense.hpp"
#include "aoiq/nn/softmax.hpp"
#include "aoiq/sac/hyper.hpp"
#include "aoiq/sac/replay_buffer.hpp"

namespace aoiq::sac {

// Actor and critic weights are single precision; targets and losses are
// accumulated in double.
using Real = float;
using Mat = nn::Matrix<Real>;
inline constexpr int kActions = 2;

/// Soft Bellman targets with the expectation over both actions taken exactly:
///   y = R_n + gamma^n * sum_a pi(a|s') (Q_target(s', a) - alpha log pi(a|s'))
/// and y = R_n for terminal transitions.
inline Eigen::VectorXd critic_targets(const TransitionBatch& batch, const nn::Mlp<Real>& target_critic,
                                      const nn::Mlp<Real>& actor, double alpha) {
  const Mat obs_after = batch.obs_after.cast<Real>();
  const Mat q_next = target_critic.infer(obs_after);
  const Mat logits = actor.infer(obs_after);
  const Mat logp = nn::log_softmax<Real>(logits);
  const Mat p = logp.array().exp().matrix();
  Eigen::VectorXd y(batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    if (batch.terminal[static_cast<std::size_t>(j)]) {
      y[j] = batch.returns[j];
      continue;
    }
    double v = 0.0;
    for (int a = 0; a < kActions; ++a)
      v += static_cast<double>(p(a, j)) * (static_cast<double>(q_next(a, j)) - alpha * static_cast<double>(logp(a, j)));
    y[j] = batch.returns[j] + batch.discounts[j] * v;
  }
  if (!y.allFinite()) throw nn::NumericError("critic targets are not finite");
  return y;
}

/// Batch-mean of sum_a pi(a|s) (alpha log pi(a|s) - Q(s,a)) with pi = softmax(logits)
/// and Q treated as a constant. Writes d(loss)/d(logits) and the mean entropy.
template <typename S>
double discrete_policy_loss(const nn::Matrix<S>& logits, const nn::Matrix<S>& q, double alpha, nn::Matrix<S>* dlogits,
                            double* entropy) {
  nn::require_shape(logits.rows() == kActions && q.rows() == kActions && logits.cols() == q.cols(),
                    "policy loss: logits and Q must be 2 x batch");
  const Eigen::Index B = logits.cols();
  const nn::Matrix<S> logp = nn::log_softmax<S>(logits);
  if (dlogits) dlogits->resize(kActions, B);
  double loss = 0.0, ent = 0.0;
  for (Eigen::Index j = 0; j < B; ++j) {
    double inner = 0.0, g[kActions], p[kActions];
    for (int a = 0; a < kActions; ++a) {
      const double la = logp(a, j);
      p[a] = std::exp(la);
      g[a] = alpha * la - static_cast<double>(q(a, j));
      inner += p[a] * g[a];
      ent -= p[a] * la;
    }
    loss += inner;
    if (dlogits)
      for (int a = 0; a < kActions; ++a)
        (*dlogits)(a, j) = static_cast<S>(p[a] * (g[a] - inner) / static_cast<double>(B));
  }
  if (entropy) *entropy = ent / static_cast<double>(B);
  return loss / static_cast<double>(B);
}

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
};

/// Discrete-action soft actor-critic with a single critic, a Polyak-averaged
/// target critic and a learned temperature.
class SacLearner {
 public:
  SacLearner(int obs_dim, const SacHyper& hyper, std::uint64_t seed)
      : hyper_(hyper),
        actor_("actor", obs_dim, {hyper.hidden_width, hyper.hidden_width}, kActions),
        critic_("critic", obs_dim, {hyper.hidden_width, hyper.hidden_width}, kActions),
        target_critic_("critic", obs_dim, {hyper.hidden_width, hyper.hidden_width}, kActions),
        log_alpha_("log_alpha", 1, 1),
        actor_opt_(nn::AdamConfig{hyper.lr_actor_critic}),
        critic_opt_(nn::AdamConfig{hyper.lr_actor_critic}),
        alpha_opt_(nn::AdamConfig{hyper.lr_temperature}) {
    Rng rng(derive_seed(seed, 0x5ac));
    actor_.init_fan_in(rng);
    critic_.init_fan_in(rng);
    critic_.layers().back().bias.value.array() += hyper.critic_value_offset;
    const double p = hyper.initial_query_probability;
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("initial query probability must lie in (0, 1)");
    actor_.layers().back().bias.value(1, 0) += static_cast<Real>(std::log(p / (1.0 - p)));
    target_critic_ = critic_;
    log_alpha_.value(0, 0) = static_cast<Real>(std::log(hyper.initial_alpha));
  }

  int obs_dim() const { return static_cast<int>(actor_.in_dim()); }
  const SacHyper& hyper() const { return hyper_; }
  double alpha() const { return std::exp(log_alpha_.value(0, 0)); }

  Eigen::Vector2d policy_probs(const Eigen::Ref<const Eigen::VectorXd>& obs) const {
    return nn::softmax<Real>(Mat(actor_.infer(obs.cast<Real>()))).col(0).cast<double>();
  }

  Eigen::Vector2d q_values(const Eigen::Ref<const Eigen::VectorXd>& obs) const {
    return critic_.infer(obs.cast<Real>()).col(0).cast<double>();
  }

  int sample_action(const Eigen::Ref<const Eigen::VectorXd>& obs, Rng& rng) const {
    return rng.bernoulli(policy_probs(obs)[1]) ? 1 : 0;
  }

  /// One gradient step on critic, actor and temperature, then a target update.
  /// All losses are formed before any parameter moves; a non-finite loss
  /// leaves every network untouched.
  UpdateStats update(const TransitionBatch& batch) {
    const Eigen::Index B = batch.size();
    if (B == 0) throw std::invalid_argument("sac update on empty batch");
    const double alpha = this->alpha();
    const Eigen::VectorXd y = critic_targets(batch, target_critic_, actor_, alpha);

    const auto critic_params = critic_.parameters();
    const auto actor_params = actor_.parameters();
    nn::zero_grad(critic_params);
    nn::zero_grad(actor_params);

    // Critic: mean squared error on the taken action.
    const Mat obs = batch.obs.cast<Real>();
    const Mat q = critic_.forward(obs);
    Mat dq = Mat::Zero(kActions, B);
    double critic_loss = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) {
      const int a = batch.actions[static_cast<std::size_t>(j)];
      const double diff = static_cast<double>(q(a, j)) - y[j];
      critic_loss += diff * diff;
      dq(a, j) = static_cast<Real>(2.0 * diff / static_cast<double>(B));
    }
    critic_loss /= static_cast<double>(B);

    // Actor: E_s sum_a pi(a|s) (alpha log pi(a|s) - Q(s,a)), Q held fixed.
    const Mat logits = actor_.forward(obs);
    Mat dlogits;
    double entropy = 0.0;
    const double actor_loss = discrete_policy_loss(logits, q, alpha, &dlogits, &entropy);

    // Temperature: -log_alpha * (target_entropy - H).
    const double gap = hyper_.target_entropy - entropy;
    const double alpha_loss = hyper_.tune_temperature ? -static_cast<double>(log_alpha_.value(0, 0)) * gap : 0.0;

    if (!std::isfinite(critic_loss) || !std::isfinite(actor_loss) || !std::isfinite(alpha_loss))
      throw nn::NumericError("non-finite SAC loss; update aborted");

    critic_.backward(dq);
    nn::clip_grad_norm(critic_params, hyper_.grad_clip);
    critic_opt_.step(critic_params);
    if (hyper_.train_actor) {
      actor_.backward(dlogits);
      nn::clip_grad_norm(actor_params, hyper_.grad_clip);
      actor_opt_.step(actor_params);
    }
    if (hyper_.tune_temperature) {
      log_alpha_.grad(0, 0) = static_cast<Real>(-gap);
      alpha_opt_.step({&log_alpha_});
    }
    nn::polyak_update(target_critic_.parameters(), critic_params, hyper_.tau_polyak);

    return {critic_loss, actor_loss, alpha_loss, this->alpha(), entropy};
  }

  nn::Mlp<Real>& actor() { return actor_; }
  nn::Mlp<Real>& critic() { return critic_; }
  nn::Mlp<Real>& target_critic() { return target_critic_; }
  const nn::Mlp<Real>& actor() const { return actor_; }
  const nn::Mlp<Real>& critic() const { return critic_; }
  const nn::Mlp<Real>& target_critic() const { return target_critic_; }
  nn::Parameter<Real>& log_alpha() { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_.value(0, 0) = static_cast<Real>(v); }

  void append_sections(std::vector<nn::CheckpointSection>& out) {
    const std::map<std::string, std::string> shape{{"obs_dim", std::to_string(obs_dim())},
                                                   {"hidden_width", std::to_string(hyper_.hidden_width)}};
    out.push_back(nn::make_section<Real>("actor", actor_.parameters(), &actor_opt_, shape));
    out.push_back(nn::make_section<Real>("critic", critic_.parameters(), &critic_opt_, shape));
    out.push_back(nn::make_section<Real>("critic_target", target_critic_.parameters(), nullptr, shape));
    out.push_back(nn::make_section<Real>("temperature", {&log_alpha_}, &alpha_opt_));
  }

  void restore_sections(const nn::Checkpoint& ckpt) {
    nn::restore_section<Real>(ckpt.section("actor"), actor_.parameters(), &actor_opt_);
    nn::restore_section<Real>(ckpt.section("critic"), critic_.parameters(), &critic_opt_);
    nn::restore_section<Real>(ckpt.section("critic_target"), target_critic_.parameters());
    nn::restore_section<Real>(ckpt.section("temperature"), {&log_alpha_}, &alpha_opt_);
  }

 private:
  SacHyper hyper_;
  nn::Mlp<Real> actor_, critic_, target_critic_;
  nn::Parameter<Real> log_alpha_;
  nn::Adam<Real> actor_opt_, critic_opt_, alpha_opt_;
};

/// Samples a batch and applies one learner update.
inline UpdateStats sac_update(const ReplayBuffer& buffer, SacLearner& learner, Rng& rng) {
  const auto batch_size = static_cast<std::size_t>(learner.hyper().batch_size);
  if (buffer.size() < batch_size) throw std::logic_error("sac_update: replay holds fewer transitions than a batch");
  return learner.update(buffer.sample(batch_size, rng));
}

}  // namespace aoiq::sac
