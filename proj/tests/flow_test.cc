// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/flow.h"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"
#include "support/oracles.h"
#include "uno/errors.h"
#include "uno/gradcheck.h"
#include "uno/optim.h"

namespace uno::flow {
namespace {

using grad::Var;

FlowModel IdentityFlow(std::size_t layers = 6) {
  Rng rng(11);
  FlowConfig cfg;
  cfg.num_layers = layers;
  return FlowModel(cfg, rng);
}

FlowModel RandomFlow(std::uint64_t seed, double scale = 0.15) {
  Rng rng(seed);
  FlowModel f(FlowConfig{}, rng);
  testing::Randomize(f.parameters(), rng, scale);
  return f;
}

Tensor RandomPoints(std::size_t n, Rng& rng, double scale = 2.0) {
  Tensor x(Shape{n, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = scale * rng.Normal();
  return x;
}

TEST(Flow, IdentityAtInitialization) {
  FlowModel f = IdentityFlow();
  Rng rng(1);
  const Tensor x = RandomPoints(32, rng);
  auto [u, logdet] = f.Forward(x);
  EXPECT_TRUE(BitEqual(u, x));
  for (double v : logdet.data()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(BitEqual(f.Inverse(x), x));
}

TEST(Flow, ConstantScaleGivesAnalyticLogdet) {
  FlowModel f = IdentityFlow(1);
  const double s = 1.3;
  // Zero weights, bias chosen so clamp * tanh(bias) == s on the active coordinate.
  auto& last = f.layers()[0].scale_net().layers().back();
  last.bias.value()[0] = std::atanh(s / 4.0);
  Rng rng(2);
  const Tensor x = RandomPoints(10, rng);
  auto [u, logdet] = f.Forward(x);
  for (double v : logdet.data()) EXPECT_NEAR(v, s, 1e-15);
  // The pass-through coordinate is untouched; the active one scales by e^s.
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(u.at(i, 0), x.at(i, 0));
    EXPECT_NEAR(u.at(i, 1), x.at(i, 1) * std::exp(s), 1e-12);
  }
}

TEST(Flow, SingleLayerInverseMatchesAnalyticInverse) {
  Rng rng(3);
  FlowConfig cfg;
  cfg.num_layers = 1;
  FlowModel f(cfg, rng);
  testing::Randomize(f.parameters(), rng, 0.5);
  const Tensor u = RandomPoints(20, rng);
  const Tensor x = f.Inverse(u);
  const auto& layer = f.layers()[0];
  for (std::size_t i = 0; i < 20; ++i) {
    const Tensor pass = Tensor::Matrix(1, 1, {u.at(i, 0)});
    const double raw = layer.scale_net().Evaluate(pass)[0];
    const double s = 4.0 * std::tanh(raw);
    const double t = layer.shift_net().Evaluate(pass)[0];
    EXPECT_EQ(x.at(i, 0), u.at(i, 0));
    EXPECT_NEAR(x.at(i, 1), (u.at(i, 1) - t) * std::exp(-s), 1e-12);
  }
}

TEST(Flow, RoundTripOnThousandPoints) {
  FlowModel f = RandomFlow(4);
  Rng rng(5);
  const Tensor x = RandomPoints(1000, rng);
  const Tensor back = f.Inverse(f.Forward(x).first);
  EXPECT_LT(MaxAbsDiff(back, x), 1e-9);
  const Tensor u = RandomPoints(1000, rng, 1.0);
  EXPECT_LT(MaxAbsDiff(f.Forward(f.Inverse(u)).first, u), 1e-9);
}

TEST(Flow, LogdetMatchesFiniteDifferenceJacobian) {
  FlowModel f = RandomFlow(6);
  Rng rng(7);
  const Tensor x = RandomPoints(100, rng);
  const Tensor logdet = f.Forward(x).second;
  for (std::size_t i = 0; i < 100; ++i) {
    const double fd = testing::LogAbsDetJacobianFd(
        [&f](const Tensor& p) { return f.Forward(p).first; },
        {x.at(i, 0), x.at(i, 1)}, 1e-6);
    EXPECT_LT(std::abs(logdet[i] - fd), 1e-5) << "point " << i;
  }
}

TEST(Flow, IdentityLogProb) {
  FlowModel f = IdentityFlow();
  const Tensor lp = f.LogProb(Tensor::Matrix(2, 2, {0, 0, 1, 0}));
  EXPECT_NEAR(lp[0], -std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(lp[0], -1.837877, 1e-6);
  EXPECT_NEAR(lp[1], -std::log(2.0 * std::numbers::pi) - 0.5, 1e-12);
  EXPECT_NEAR(lp[1], -2.337877, 1e-6);
}

TEST(Flow, LogProbRecomposesFromLatentAndLogdet) {
  FlowModel f = RandomFlow(8);
  Rng rng(9);
  const Tensor x = RandomPoints(50, rng);
  const Tensor lp = f.LogProb(x);
  auto [u, logdet] = f.Forward(x);
  const double c = -0.5 * 2.0 * std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < 50; ++i) {
    const double sq = 0.0 + u.at(i, 0) * u.at(i, 0) + u.at(i, 1) * u.at(i, 1);
    EXPECT_EQ(lp[i], (sq * -0.5 + c) + logdet[i]);
  }
}

TEST(Flow, IdentitySamplesAreStandardNormal) {
  FlowModel f = IdentityFlow();
  Rng rng(10);
  const Tensor s = f.Sample(100000, rng);
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < 100000; ++i) {
    m0 += s.at(i, 0);
    m1 += s.at(i, 1);
  }
  EXPECT_LT(std::abs(m0 / 1e5), 0.02);
  EXPECT_LT(std::abs(m1 / 1e5), 0.02);
}

TEST(Flow, SamplingIsDeterministicGivenSeed) {
  FlowModel f = RandomFlow(12);
  Rng a(77), b(77);
  EXPECT_TRUE(BitEqual(f.Sample(64, a), f.Sample(64, b)));
}

TEST(Flow, ZeroSamplesIsEmpty) {
  FlowModel f = RandomFlow(13);
  Rng rng(1);
  const Tensor s = f.Sample(0, rng);
  EXPECT_EQ(s.shape(), (Shape{0, 2}));
  EXPECT_EQ(s.size(), 0u);
}

TEST(Flow, DimensionMismatch) {
  FlowModel f = IdentityFlow();
  EXPECT_THROW(f.Forward(Tensor(Shape{3, 3})), ShapeError);
  EXPECT_THROW(f.Inverse(Tensor(Shape{3})), ShapeError);
}

TEST(Flow, FreezeRemovesGradients) {
  FlowModel f = RandomFlow(14);
  f.Freeze();
  EXPECT_TRUE(f.frozen());
  grad::Tape tape;
  Var lp = grad::Mean(f.LogProb(tape, tape.Constant(Tensor::Matrix(1, 2, {0.1, 0.2}))));
  EXPECT_TRUE(tape.Backward(lp).empty());
}

TEST(Flow, ReparametrizedSampleGradCheck) {
  FlowModel f = RandomFlow(15, 0.3);
  Rng rng(16);
  const Tensor noise = f.BaseNoise(8, rng);
  auto loss = [&](grad::Tape& t) {
    return grad::Mean(grad::Square(f.SampleFromNoise(t, noise)));
  };
  auto params = f.parameters();
  EXPECT_LT(grad::GradCheckParams(loss, params, 1e-5), 1e-6);
}

TEST(Flow, MaximumLikelihoodImprovesHeldOutLikelihood) {
  // Two-component mixture at (+-2, 0) with standard deviation 0.5.
  auto mixture = [](std::size_t n, Rng& rng) {
    Tensor x(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      const double c = rng.Uniform() < 0.5 ? -2.0 : 2.0;
      x.at(i, 0) = c + 0.5 * rng.Normal();
      x.at(i, 1) = 0.5 * rng.Normal();
    }
    return x;
  };
  Rng rng(17);
  FlowModel f(FlowConfig{}, rng);
  const Tensor train = mixture(2048, rng);
  const Tensor held_out = mixture(2048, rng);
  grad::SgdMomentum opt(0.0, 0.0);
  auto params = f.parameters();
  std::vector<double> curve;
  auto mean_ll = [&] {
    const Tensor lp = f.LogProb(held_out);
    double s = 0;
    for (double v : lp.data()) s += v;
    return s / static_cast<double>(lp.size());
  };
  curve.push_back(mean_ll());
  for (int step = 0; step < 200; ++step) {
    grad::Tape tape;
    Var nll = grad::Neg(grad::Mean(f.LogProb(tape, tape.Constant(train))));
    opt.Step(params, tape.Backward(nll), 0.0002);
    curve.push_back(mean_ll());
  }
  const std::vector<double> smooth = testing::MovingAverage(curve, 10);
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    EXPECT_GE(smooth[i] - smooth[i - 1], 0.0) << "step " << i;
  }
  EXPECT_GT(curve.back(), curve.front() + 0.1);
}

}  // namespace
}  // namespace uno::flow
