#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "aoiq/sac/learner.hpp"
#include "aoiq/sac/nstep.hpp"
#include "aoiq/sac/replay_buffer.hpp"
#include "aoiq/sac/reward.hpp"
#include "support/sac_fixtures.hpp"

using namespace aoiq;

namespace {

double brute_force_discounted(const std::vector<double>& r, double bootstrap, double gamma, bool terminal) {
  double total = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) total += std::pow(gamma, static_cast<double>(k)) * r[k];
  if (!terminal) total += std::pow(gamma, static_cast<double>(r.size())) * bootstrap;
  return total;
}

sac::Transition make_transition(int obs_dim, double tag, int action = 0) {
  sac::Transition t;
  t.obs.assign(static_cast<std::size_t>(obs_dim), tag);
  t.obs_after_n.assign(static_cast<std::size_t>(obs_dim), -tag);
  t.action = action;
  t.n_step_return = tag;
  t.n_used = 1;
  t.discount = 0.99;
  return t;
}

}  // namespace

TEST(Reward, EndpointsAndMidpoint) {
  EXPECT_EQ(sac::reward(0.0), 5.0);
  EXPECT_EQ(sac::reward(8e4), 0.0);
  EXPECT_DOUBLE_EQ(sac::reward(4e4), 2.5);
  EXPECT_EQ(sac::reward(1e9), 0.0);
  EXPECT_THROW(sac::reward(-1e-9), std::invalid_argument);
}

TEST(Reward, MonotoneAndBounded) {
  double prev = sac::reward(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double r = sac::reward(1e5 * i / 1000.0);
    EXPECT_LE(r, prev);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 5.0);
    prev = r;
  }
}

TEST(NStepFold, ClosedFormExamples) {
  const std::vector<double> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(sac::nstep_fold(ones, 0.0, 0.5), 1.75);
  const std::vector<double> single{2.0};
  EXPECT_DOUBLE_EQ(sac::nstep_fold(single, 10.0, 0.9), 2.0 + 0.9 * 10.0);
  EXPECT_DOUBLE_EQ(sac::nstep_fold(single, 10.0, 0.9, true), 2.0);
  EXPECT_THROW(sac::nstep_fold(std::vector<double>{}, 0.0, 0.9), std::invalid_argument);
}

TEST(NStepFold, MatchesBruteForceOnRandomSequences) {
  Rng rng(5);
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> r(1 + rng.index(60));
    for (auto& x : r) x = rng.uniform(-5.0, 5.0);
    const double gamma = rng.uniform(), boot = rng.uniform(-100.0, 100.0);
    const bool terminal = rng.bernoulli(0.3);
    EXPECT_NEAR(sac::nstep_fold(r, boot, gamma, terminal), brute_force_discounted(r, boot, gamma, terminal), 1e-12);
  }
}

TEST(NStepAccumulator, EmitsWindowsAndTruncatesAtEpisodeEnd) {
  std::vector<sac::Transition> out;
  const double gamma = 0.9;
  sac::NStepAccumulator acc(3, gamma, [&](sac::Transition&& t) { out.push_back(std::move(t)); });
  const int T = 5;
  std::vector<double> obs(1);
  for (int t = 0; t < T; ++t) {
    obs[0] = t;
    sim::SlotRecord rec;
    rec.slot = t;
    rec.observation = obs;
    rec.action = t % 2;
    rec.reward = t + 1.0;
    rec.terminal = t == T - 1;
    acc.on_slot(rec);
  }
  acc.on_episode_end();
  ASSERT_EQ(out.size(), 5u);
  // Full windows bootstrap from the observation n slots later.
  EXPECT_FALSE(out[0].terminal);
  EXPECT_EQ(out[0].n_used, 3);
  EXPECT_DOUBLE_EQ(out[0].n_step_return, 1 + gamma * 2 + gamma * gamma * 3);
  EXPECT_DOUBLE_EQ(out[0].obs_after_n[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1].obs_after_n[0], 4.0);
  // The tail is truncated and terminal.
  for (std::size_t i = 2; i < out.size(); ++i) {
    EXPECT_TRUE(out[i].terminal);
    EXPECT_EQ(out[i].n_used, static_cast<int>(T - i));
  }
  for (const auto& t : out) EXPECT_EQ(t.discount, std::pow(gamma, t.n_used));
  EXPECT_DOUBLE_EQ(out[4].n_step_return, 5.0);
}

TEST(CriticTargets, TerminalIsReturnOnly) {
  sac::SacHyper h;
  h.hidden_width = 8;
  sac::SacLearner learner(2, h, 1);
  sac::TransitionBatch b;
  b.obs = nn::Matrix<double>::Random(2, 3);
  b.obs_after = nn::Matrix<double>::Random(2, 3);
  b.actions = {0, 1, 0};
  b.returns = Eigen::Vector3d(1.5, -2.0, 3.0);
  b.discounts = Eigen::Vector3d::Constant(0.9);
  b.terminal = {true, true, true};
  const Eigen::VectorXd y = sac::critic_targets(b, learner.target_critic(), learner.actor(), 0.7);
  EXPECT_EQ(y, b.returns);
}

TEST(CriticTargets, UniformPolicyEqualQClosedForm) {
  sac::SacHyper h;
  h.hidden_width = 8;
  sac::SacLearner learner(2, h, 1);
  for (auto* net : {&learner.actor(), &learner.target_critic()})
    for (auto& l : net->layers()) {
      l.weight.value.setZero();
      l.bias.value.setZero();
    }
  const float c = 4.0f;
  learner.target_critic().layers().back().bias.value.setConstant(c);
  sac::TransitionBatch b;
  b.obs = nn::Matrix<double>::Random(2, 1);
  b.obs_after = nn::Matrix<double>::Random(2, 1);
  b.actions = {1};
  b.returns = Eigen::VectorXd::Constant(1, 2.0);
  b.discounts = Eigen::VectorXd::Constant(1, std::pow(0.99, 7));
  b.terminal = {false};
  const double alpha = 0.3;
  const Eigen::VectorXd y = sac::critic_targets(b, learner.target_critic(), learner.actor(), alpha);
  EXPECT_NEAR(y[0], 2.0 + std::pow(0.99, 7) * (c - alpha * std::log(0.5)), 1e-5);
}

TEST(CriticTargets, MatchesDirectSummation) {
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    sac::SacHyper h;
    h.hidden_width = 6;
    sac::SacLearner learner(3, h, 10 + static_cast<std::uint64_t>(k));
    sac::TransitionBatch b;
    const int B = 4;
    b.obs = nn::Matrix<double>::Random(3, B);
    b.obs_after = nn::Matrix<double>::Random(3, B);
    b.returns = Eigen::VectorXd::Random(B);
    b.discounts = Eigen::VectorXd::Constant(B, 0.95);
    for (int j = 0; j < B; ++j) {
      b.actions.push_back(j % 2);
      b.terminal.push_back(rng.bernoulli(0.3));
    }
    const double alpha = rng.uniform(0.0, 1.0);
    const Eigen::VectorXd y = sac::critic_targets(b, learner.target_critic(), learner.actor(), alpha);
    for (int j = 0; j < B; ++j) {
      const Eigen::VectorXd s2 = b.obs_after.col(j);
      const Eigen::Vector2d pi = learner.policy_probs(s2);
      const Eigen::Vector2d qt = learner.target_critic().infer(s2.cast<float>()).col(0).cast<double>();
      double expect = b.returns[j];
      if (!b.terminal[static_cast<std::size_t>(j)])
        for (int a = 0; a < 2; ++a) expect += 0.95 * pi[a] * (qt[a] - alpha * std::log(pi[a]));
      EXPECT_NEAR(y[j], expect, 1e-5 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST(ReplayBuffer, EvictsOldestFirstAndNeverExceedsCapacity) {
  sac::ReplayBuffer buf(4, 2);
  for (int i = 0; i < 10; ++i) {
    buf.push(make_transition(2, i));
    EXPECT_LE(buf.size(), 4u);
  }
  EXPECT_EQ(buf.total_pushed(), 10u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(buf.at(k).n_step_return, 6.0 + static_cast<double>(k));
  EXPECT_THROW(buf.push(make_transition(3, 0)), nn::ShapeError);
  EXPECT_THROW(buf.push(make_transition(2, 0, 2)), std::invalid_argument);
}

TEST(ReplayBuffer, SamplingIsUniform) {
  const std::size_t n = 50;
  sac::ReplayBuffer buf(n, 1);
  for (std::size_t i = 0; i < n; ++i) buf.push(make_transition(1, static_cast<double>(i)));
  Rng rng(21);
  std::vector<double> counts(n, 0.0);
  const int draws = 100'000;
  for (std::size_t i : buf.sample_indices(draws, rng)) counts[i] += 1.0;
  const double expected = static_cast<double>(draws) / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(n - 1));
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.999));
}

TEST(ReplayBuffer, BatchCarriesStoredFields) {
  sac::ReplayBuffer buf(8, 2);
  buf.push(make_transition(2, 3.0, 1));
  Rng rng(1);
  const auto b = buf.sample(2, rng);
  EXPECT_EQ(b.size(), 2);
  EXPECT_EQ(b.actions[0], 1);
  EXPECT_DOUBLE_EQ(b.obs(1, 0), 3.0);
  EXPECT_DOUBLE_EQ(b.obs_after(0, 1), -3.0);
  EXPECT_DOUBLE_EQ(b.returns[0], 3.0);
}

TEST(SacLearner, ActorIsPmfAndCriticHasTwoOutputs) {
  sac::SacLearner learner(5, sac::SacHyper{}, 4);
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(5);
  const Eigen::Vector2d p = learner.policy_probs(obs);
  EXPECT_NEAR(p.sum(), 1.0, 1e-6);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_EQ(learner.critic().out_dim(), 2);
  EXPECT_GT(learner.alpha(), 0.0);
}

TEST(SacLearner, InitialQueryProbabilityShiftsActorLogOdds) {
  sac::SacHyper h;
  sac::SacLearner base(5, h, 4);
  h.initial_query_probability = 0.05;
  sac::SacLearner shifted(5, h, 4);
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd obs(5);
    for (auto& x : obs) x = rng.normal();
    const Eigen::Vector2d a = base.policy_probs(obs), b = shifted.policy_probs(obs);
    const double shift = std::log(b[1] / b[0]) - std::log(a[1] / a[0]);
    EXPECT_NEAR(shift, std::log(0.05 / 0.95), 1e-4);
  }
  h.initial_query_probability = 1.0;
  EXPECT_THROW(sac::SacLearner(5, h, 4), std::invalid_argument);
}

TEST(SacLearner, NonFiniteLossLeavesNetworksUntouched) {
  sac::SacHyper h;
  h.hidden_width = 8;
  sac::SacLearner learner(2, h, 4);
  sac::TransitionBatch b;
  b.obs = nn::Matrix<double>::Random(2, 2);
  b.obs_after = b.obs;
  b.actions = {0, 1};
  b.returns = Eigen::Vector2d(1.0, std::numeric_limits<double>::infinity());
  b.discounts = Eigen::Vector2d::Constant(0.9);
  b.terminal = {true, true};
  const auto before = learner.critic().layers().front().weight.value;
  const double log_alpha = learner.log_alpha().value(0, 0);
  EXPECT_THROW(learner.update(b), nn::NumericError);
  EXPECT_TRUE(before == learner.critic().layers().front().weight.value);
  EXPECT_EQ(log_alpha, learner.log_alpha().value(0, 0));
}

TEST(SacLearner, SymmetricBanditShrinksEntropyGap) {
  const auto out = oracle::run_bandit({0.5, 0.5}, std::log(2.0), 500, 2, [](const auto&) { return false; });
  EXPECT_LT(std::abs(out.entropy - std::log(2.0)), 0.05);
}

TEST(SacLearner, BanditPrefersRewardedAction) {
  const auto out = oracle::run_bandit({1.0, 0.0}, 0.05, 5000, 1, [](const auto& o) { return o.prob_action0 > 0.95; });
  EXPECT_GT(out.prob_action0, 0.95);
}

TEST(SacLearner, CriticMatchesValueIterationOnChain) { EXPECT_LT(oracle::chain_critic_error(10'000, 3), 0.05); }

TEST(SacLearner, SameSeedSameUpdates) {
  auto run = [] {
    sac::SacHyper h;
    h.hidden_width = 8;
    h.batch_size = 4;
    sac::SacLearner learner(2, h, 8);
    sac::ReplayBuffer buf(16, 2);
    for (int i = 0; i < 16; ++i) buf.push(make_transition(2, 0.1 * i, i % 2));
    Rng rng(3);
    for (int i = 0; i < 20; ++i) sac::sac_update(buf, learner, rng);
    return learner.critic().layers().back().weight.value;
  };
  EXPECT_TRUE(run() == run());
}
