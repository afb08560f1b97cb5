#include <gtest/gtest.h>

#include <filesystem>

#include "aoiq/estimator/estimator.hpp"
#include "aoiq/nn/adam.hpp"
#include "aoiq/nn/checkpoint.hpp"
#include "aoiq/nn/dense.hpp"
#include "aoiq/nn/lstm.hpp"
#include "aoiq/nn/softmax.hpp"
#include "aoiq/sac/learner.hpp"
#include "support/gradcheck.hpp"

using namespace aoiq;
using Md = nn::Matrix<double>;

namespace {

constexpr int kInstances = 20;
constexpr double kTol = 1e-4;

Md random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(sd);
  return m;
}

// Linear probe sum(W .* y) turns any layer output into a scalar loss.
double probe(const Md& y, const Md& w) { return (y.array() * w.array()).sum(); }

}  // namespace

class DenseGradient : public ::testing::TestWithParam<nn::Activation> {};

TEST_P(DenseGradient, MatchesFiniteDifferences) {
  Rng rng(11);
  for (int k = 0; k < kInstances; ++k) {
    const auto in = 1 + static_cast<Eigen::Index>(rng.index(5));
    const auto out = 1 + static_cast<Eigen::Index>(rng.index(5));
    const auto batch = 1 + static_cast<Eigen::Index>(rng.index(4));
    nn::Dense<double> layer("d", in, out, GetParam());
    layer.init_fan_in(rng);
    Md x = random_matrix(rng, in, batch);
    const Md w = random_matrix(rng, out, batch);
    nn::zero_grad(layer.parameters());
    layer.forward(x);
    const Md dx = layer.backward(w);
    auto loss = [&] { return probe(layer.infer(x), w); };
    EXPECT_LT(oracle::max_relative_error(layer.parameters(), loss), kTol) << "instance " << k;
    EXPECT_LT(oracle::max_relative_error_input(x, dx, loss), kTol) << "instance " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, DenseGradient, ::testing::Values(nn::Activation::identity, nn::Activation::relu));

TEST(MlpGradient, MatchesFiniteDifferences) {
  Rng rng(12);
  for (int k = 0; k < kInstances; ++k) {
    const auto in = 1 + static_cast<Eigen::Index>(rng.index(4));
    nn::Mlp<double> mlp("m", in, {3 + static_cast<Eigen::Index>(rng.index(3)), 4}, 2);
    mlp.init_fan_in(rng);
    Md x = random_matrix(rng, in, 3);
    const Md w = random_matrix(rng, 2, 3);
    nn::zero_grad(mlp.parameters());
    mlp.forward(x);
    const Md dx = mlp.backward(w);
    auto loss = [&] { return probe(mlp.infer(x), w); };
    EXPECT_LT(oracle::max_relative_error(mlp.parameters(), loss), kTol) << "instance " << k;
    EXPECT_LT(oracle::max_relative_error_input(x, dx, loss), kTol) << "instance " << k;
  }
}

TEST(LstmGradient, MatchesFiniteDifferencesThroughTime) {
  Rng rng(13);
  for (int k = 0; k < kInstances; ++k) {
    const auto in = 1 + static_cast<Eigen::Index>(rng.index(4));
    const auto hidden = 1 + static_cast<Eigen::Index>(rng.index(4));
    const auto batch = 1 + static_cast<Eigen::Index>(rng.index(3));
    const std::size_t T = 1 + rng.index(5);
    nn::Lstm<double> lstm("l", in, hidden);
    lstm.init(rng);
    std::vector<Md> xs, ws;
    for (std::size_t t = 0; t < T; ++t) {
      xs.push_back(random_matrix(rng, in, batch));
      ws.push_back(random_matrix(rng, hidden, batch));
    }
    const nn::LstmState<double> init{random_matrix(rng, hidden, batch, 0.5), random_matrix(rng, hidden, batch, 0.5)};
    auto loss = [&] {
      double total = 0.0;
      nn::LstmState<double> s = init;
      for (std::size_t t = 0; t < T; ++t) {
        s = lstm.step(xs[t], s);
        total += probe(s.h, ws[t]);
      }
      return total;
    };
    nn::zero_grad(lstm.parameters());
    lstm.clear_tape();
    lstm.forward_sequence(xs, init);
    const auto dxs = lstm.backward_sequence(ws);
    EXPECT_LT(oracle::max_relative_error(lstm.parameters(), loss), kTol) << "instance " << k;
    for (std::size_t t = 0; t < T; ++t)
      EXPECT_LT(oracle::max_relative_error_input(xs[t], dxs[t], loss), kTol) << "instance " << k << " step " << t;
  }
}

TEST(SoftmaxGradient, MatchesFiniteDifferences) {
  Rng rng(14);
  for (int k = 0; k < kInstances; ++k) {
    const auto n = 2 + static_cast<Eigen::Index>(rng.index(4));
    Md z = random_matrix(rng, n, 3, 2.0);
    const Md w = random_matrix(rng, n, 3);
    const Md p = nn::softmax<double>(z);
    const Md dz = nn::softmax_backward<double>(p, w);
    EXPECT_LT(oracle::max_relative_error_input(z, dz, [&] { return probe(nn::softmax<double>(z), w); }), kTol);
  }
}

TEST(MseGradient, MatchesFiniteDifferences) {
  Rng rng(15);
  for (int k = 0; k < kInstances; ++k) {
    Md pred = random_matrix(rng, 1 + static_cast<Eigen::Index>(rng.index(4)), 3);
    const Md target = random_matrix(rng, pred.rows(), pred.cols());
    Md grad;
    nn::mse_loss<double>(pred, target, &grad);
    EXPECT_LT(oracle::max_relative_error_input(pred, grad, [&] { return nn::mse_loss<double>(pred, target); }), kTol);
  }
}

TEST(PolicyLossGradient, MatchesFiniteDifferences) {
  Rng rng(16);
  for (int k = 0; k < kInstances; ++k) {
    const auto B = 1 + static_cast<Eigen::Index>(rng.index(5));
    Md logits = random_matrix(rng, 2, B, 2.0);
    const Md q = random_matrix(rng, 2, B, 3.0);
    const double alpha = rng.uniform(0.0, 2.0);
    Md grad;
    sac::discrete_policy_loss<double>(logits, q, alpha, &grad, nullptr);
    auto loss = [&] { return sac::discrete_policy_loss<double>(logits, q, alpha, nullptr, nullptr); };
    EXPECT_LT(oracle::max_relative_error_input(logits, grad, loss), kTol);
  }
}

TEST(EstimatorGradient, MatchesFiniteDifferencesOnSingleStepWindows) {
  // With one step per window the fed-back estimate is window data, so the
  // detached-feedback gradient is the exact gradient.
  Rng rng(17);
  for (int k = 0; k < kInstances; ++k) {
    estimator::EstimatorConfig cfg;
    cfg.recurrent_width = 2 + static_cast<int>(rng.index(3));
    cfg.fc_width = 2 + static_cast<int>(rng.index(3));
    estimator::EstimatorModel model(cfg, 100 + static_cast<std::uint64_t>(k));
    for (auto* p : model.parameters()) p->value = random_matrix(rng, p->value.rows(), p->value.cols(), 0.3);
    std::vector<estimator::EstimatorWindow> batch(1 + rng.index(3));
    for (auto& w : batch) {
      w.h0 = random_matrix(rng, cfg.recurrent_width, 1, 0.3).col(0);
      w.c0 = random_matrix(rng, cfg.recurrent_width, 1, 0.3).col(0);
      w.prev_estimate0 = random_matrix(rng, 4, 1).col(0);
      w.steps.push_back({rng.uniform(0.0, 30.0), random_matrix(rng, 4, 1).col(0), random_matrix(rng, 4, 1).col(0)});
    }
    nn::zero_grad(model.parameters());
    estimator::estimator_loss_and_gradients(model, batch);
    auto params = model.parameters();
    std::vector<Md> analytic;
    for (auto* p : params) analytic.push_back(p->grad);
    auto loss = [&] {
      const double l = estimator::estimator_loss_and_gradients(model, batch);
      return l;
    };
    // Each loss evaluation overwrites the gradients, so compare against the saved copy.
    double largest = 0.0;
    for (const auto& g : analytic) largest = std::max(largest, g.cwiseAbs().maxCoeff());
    const double floor = oracle::relative_floor(largest);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (Eigen::Index j = 0; j < params[i]->value.size(); ++j) {
        double& w = params[i]->value.data()[j];
        const double saved = w;
        w = saved + 1e-5;
        const double up = loss();
        w = saved - 1e-5;
        const double down = loss();
        w = saved;
        const double numeric = (up - down) / 2e-5;
        const double a = analytic[i].data()[j];
        worst = std::max(worst, std::abs(numeric - a) / std::max({std::abs(numeric), std::abs(a), floor}));
      }
    }
    EXPECT_LT(worst, kTol) << "instance " << k;
  }
}

TEST(Adam, FirstStepMovesEachWeightByLearningRate) {
  nn::Parameter<double> p("p", 2, 1);
  p.value << 1.0, -1.0;
  p.grad << 0.5, -3.0;
  nn::Adam<double> opt(nn::AdamConfig{0.01});
  opt.step({&p});
  EXPECT_NEAR(p.value(0, 0), 0.99, 1e-9);
  EXPECT_NEAR(p.value(1, 0), -0.99, 1e-9);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, RejectsNonFiniteGradient) {
  nn::Parameter<double> p("p", 1, 1);
  p.grad(0, 0) = std::nan("");
  nn::Adam<double> opt;
  EXPECT_THROW(opt.step({&p}), nn::NumericError);
  EXPECT_EQ(p.value(0, 0), 0.0);
}

TEST(ClipGradNorm, RescalesToMaximum) {
  nn::Parameter<double> a("a", 1, 1), b("b", 1, 1);
  a.grad(0, 0) = 3.0;
  b.grad(0, 0) = 4.0;
  EXPECT_DOUBLE_EQ(nn::clip_grad_norm<double>({&a, &b}, 1.0), 5.0);
  EXPECT_NEAR(nn::grad_norm<double>({&a, &b}), 1.0, 1e-12);
}

TEST(Polyak, BlendsTowardSource) {
  nn::Parameter<double> t("t", 1, 1), s("s", 1, 1);
  t.value(0, 0) = 0.0;
  s.value(0, 0) = 1.0;
  nn::polyak_update<double>({&t}, {&s}, 0.25);
  EXPECT_DOUBLE_EQ(t.value(0, 0), 0.25);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(3);
  nn::Mlp<double> mlp("m", 3, {4}, 2);
  mlp.init_fan_in(rng);
  nn::Adam<double> opt;
  nn::zero_grad(mlp.parameters());
  mlp.forward(random_matrix(rng, 3, 2));
  mlp.backward(random_matrix(rng, 2, 2));
  opt.step(mlp.parameters());
  nn::Checkpoint ckpt;
  ckpt.sections.push_back(nn::make_section<double>("mlp", mlp.parameters(), &opt, {{"k", "v"}}));
  const auto path = std::filesystem::temp_directory_path() / "aoiq_roundtrip.ckpt";
  nn::save_checkpoint(ckpt, path);
  const nn::Checkpoint back = nn::load_checkpoint(path);
  std::filesystem::remove(path);

  nn::Mlp<double> other("m", 3, {4}, 2);
  nn::Adam<double> other_opt;
  nn::restore_section<double>(back.section("mlp"), other.parameters(), &other_opt);
  EXPECT_EQ(back.section("mlp").attribute("k"), "v");
  EXPECT_EQ(other_opt.steps(), opt.steps());
  const auto a = mlp.parameters(), b = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i]->value == b[i]->value);
  EXPECT_EQ(nn::serialize_checkpoint(ckpt), nn::serialize_checkpoint(back));
}

TEST(Checkpoint, RejectsCorruptOrMismatchedInput) {
  const std::string junk = "not a checkpoint";
  EXPECT_THROW(nn::deserialize_checkpoint(std::vector<char>(junk.begin(), junk.end())), nn::CheckpointError);
  nn::Mlp<double> mlp("m", 3, {4}, 2);
  nn::Checkpoint ckpt;
  ckpt.sections.push_back(nn::make_section<double>("mlp", mlp.parameters(), nullptr));
  std::vector<char> bytes = nn::serialize_checkpoint(ckpt);
  bytes.resize(bytes.size() - 5);
  EXPECT_THROW(nn::deserialize_checkpoint(bytes), nn::CheckpointError);
  nn::Mlp<double> wrong("m", 3, {5}, 2);
  EXPECT_THROW(nn::restore_section<double>(ckpt.section("mlp"), wrong.parameters()), nn::CheckpointError);
  EXPECT_THROW(ckpt.section("missing"), nn::CheckpointError);
}

TEST(Dense, RejectsWrongInputShape) {
  nn::Dense<double> d("d", 3, 2, nn::Activation::relu);
  EXPECT_THROW(d.infer(Md::Zero(4, 1)), nn::ShapeError);
}
