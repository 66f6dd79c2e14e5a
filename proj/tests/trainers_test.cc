// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/trainers.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "support/primitive_cases.h"
#include "uno/errors.h"
#include "uno/score.h"

namespace uno::train {
namespace {

using grad::Tape;
using grad::Var;

synth::SynthSpec SmallSpec(std::uint64_t seed) {
  synth::SynthSpec s;
  s.seed = seed;
  s.n_train = 240;
  s.n_val = 60;
  s.n_test = 60;
  s.n_negatives = 120;
  s.n_near = 40;
  s.n_far = 40;
  return s;
}

TrainConfig FastConfig(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.steps = 40;
  cfg.finetune_steps = 40;
  cfg.batch_size = 32;
  cfg.flow_batch = 32;
  cfg.log_every = 10;
  return cfg;
}

net::FeatureConfig SmallFeatures() {
  net::FeatureConfig f;
  f.hidden = {16, 16};
  f.feature_dim = 8;
  return f;
}

flow::FlowConfig SmallFlow() {
  flow::FlowConfig f;
  f.num_layers = 2;
  f.hidden = 16;
  return f;
}

TEST(PerClassCount, DivisibilityRule) {
  EXPECT_THROW(PerClassCount(10, 4, RemainderRule::kError), ConfigError);
  EXPECT_EQ(PerClassCount(10, 4, RemainderRule::kTruncate), 2u);
  EXPECT_EQ(PerClassCount(8, 4, RemainderRule::kError), 2u);
  EXPECT_EQ(PerClassCount(12, 4, RemainderRule::kError), 3u);
  EXPECT_THROW(PerClassCount(3, 4, RemainderRule::kTruncate), ConfigError);
}

TEST(BalancedSampler, ExactCountsInEveryBatch) {
  Rng data_rng(1);
  std::vector<int> labels(103);
  for (int& y : labels) y = 1 + static_cast<int>(data_rng.UniformInt(4));
  labels[0] = 1;
  labels[1] = 2;
  labels[2] = 3;
  labels[3] = 4;
  BalancedSampler sampler(labels, std::vector<std::size_t>(4, 3), Rng(2));
  for (int b = 0; b < 10000; ++b) {
    const std::vector<std::size_t> idx = sampler.Next();
    ASSERT_EQ(idx.size(), 12u);
    std::vector<int> counts(5, 0);
    for (std::size_t i : idx) ++counts[labels[i]];
    for (int c = 1; c <= 4; ++c) ASSERT_EQ(counts[c], 3) << "batch " << b;
  }
}

TEST(BalancedSampler, CoversClassBeforeRepeating) {
  const std::vector<int> labels = {1, 1, 1, 1, 1, 2};
  BalancedSampler sampler(labels, {5, 1}, Rng(3));
  std::vector<std::size_t> idx = sampler.Next();
  std::sort(idx.begin(), idx.begin() + 5);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(BalancedSampler, DeterministicAndRejectsEmptyClass) {
  const std::vector<int> labels = {1, 2, 1, 2, 1, 2};
  BalancedSampler a(labels, {2, 2}, Rng(4));
  BalancedSampler b(labels, {2, 2}, Rng(4));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.Next(), b.Next());
  EXPECT_THROW(BalancedSampler(std::vector<int>{1, 1}, {1, 1}, Rng(5)), ConfigError);
}

TEST(CrossEntropy, HandValues) {
  EXPECT_NEAR(CrossEntropy(Tensor(Shape{1, 11}, 0.0), {4}), std::log(11.0), 1e-14);
  EXPECT_NEAR(std::log(11.0), 2.3979, 1e-4);
  EXPECT_NEAR(CrossEntropy(Tensor(Shape{1, 3}, std::vector<double>{1, 0, 0}), {1}), 0.55144,
              5e-6);
  EXPECT_LT(CrossEntropy(Tensor(Shape{1, 3}, std::vector<double>{60, 0, 0}), {1}), 1e-20);
}

TEST(CrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(CrossEntropy(Tensor(Shape{1, 3}, 0.0), {0}), ContractError);
  EXPECT_THROW(CrossEntropy(Tensor(Shape{1, 3}, 0.0), {4}), ContractError);
  EXPECT_THROW(CrossEntropy(Tensor(Shape{2, 3}, 0.0), {1}), ShapeError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Rng rng(6);
  const Tensor logits = uno::testing::RandomTensor(Shape{5, 4}, rng, 2.0);
  const std::vector<int> y = {1, 4, 2, 2, 3};
  grad::Parameter p("logits", logits);
  Tape tape;
  const Var loss = CrossEntropy(tape, tape.Param(p), y);
  EXPECT_NEAR(loss.value()[0], CrossEntropy(logits, y), 1e-14);
  const grad::GradientMap g = tape.Backward(loss);
  const Tensor& d = g.at(p.id());
  const Tensor probs = net::Softmax(logits);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double expect = (probs.at(r, c) - (static_cast<int>(c) + 1 == y[r] ? 1.0 : 0.0)) / 5;
      EXPECT_NEAR(d.at(r, c), expect, 1e-14);
    }
  }
}

TEST(Jsd, HandValuesAndBounds) {
  EXPECT_NEAR(JsdUniform(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0.0, 1e-15);
  EXPECT_NEAR(JsdUniform(std::vector<double>{1.0, 0.0}), 0.215761, 1e-6);
  // Direct evaluation with M = (U + p) / 2.
  const double m0 = 0.75, m1 = 0.25;
  const double direct = 0.5 * (0.5 * std::log(0.5 / m0) + 0.5 * std::log(0.5 / m1)) +
                        0.5 * (1.0 * std::log(1.0 / m0));
  EXPECT_NEAR(JsdUniform(std::vector<double>{1.0, 0.0}), direct, 1e-15);
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> logits(2 + rng.UniformInt(9));
    for (double& v : logits) v = 8.0 * rng.Normal();
    const double j = JsdUniform(net::Softmax(logits));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, std::numbers::ln2);
  }
  EXPECT_THROW(JsdUniform(std::vector<double>{0.7, 0.7}), DomainError);
  EXPECT_THROW(JsdUniform(std::vector<double>{1.5, -0.5}), DomainError);
}

TEST(Jsd, TapeVersionMatchesScalar) {
  Rng rng(8);
  const Tensor logits = uno::testing::RandomTensor(Shape{6, 3}, rng, 2.0);
  Tape tape;
  const Var j = JsdUniform(tape.Constant(logits));
  const Tensor p = net::Softmax(logits);
  double mean = 0.0;
  for (std::size_t r = 0; r < 6; ++r) {
    mean += JsdUniform(std::vector<double>{p.at(r, 0), p.at(r, 1), p.at(r, 2)});
  }
  EXPECT_NEAR(j.value()[0], mean / 6.0, 1e-14);
}

TEST(TrainConfig, JsonRoundTripAndRejections) {
  TrainConfig cfg = FastConfig(3);
  cfg.negatives_per_batch = 5;
  cfg.flow_optimizer = FlowOptimizer::kSgd;
  const TrainConfig back = TrainConfigFromJson(ToJson(cfg));
  EXPECT_EQ(ToJson(back), ToJson(cfg));
  try {
    TrainConfigFromJson(Json{{"learning_rate", 0.1}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
  EXPECT_THROW(TrainConfigFromJson(Json{{"beta", -1.0}}), ConfigError);
  EXPECT_EQ(TrainConfig{}.beta, 0.03);
}

TEST(JointStep, IdentityFlowFirstStepMle) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(1));
  Rng rng(9);
  net::OpenSetModel model = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  flow::FlowModel flow(SmallFlow(), rng);
  TrainConfig cfg = FastConfig(1);
  JointState state(cfg);
  const Tensor x = Gather(bundle.train.x, {0, 1, 2, 3, 4, 5, 6, 7});
  const std::vector<int> y = Gather(bundle.train.y, {0, 1, 2, 3, 4, 5, 6, 7});
  double expect = 0.0;
  for (std::size_t r = 0; r < 8; ++r) {
    const double a = x.at(r, 0), b = x.at(r, 1);
    expect += std::log(2.0 * std::numbers::pi) + 0.5 * (a * a + b * b);
  }
  expect /= 8.0;
  const LossBreakdown l = JointStep(model, flow, x, y, flow.BaseNoise(16, rng), cfg, state, 0);
  EXPECT_NEAR(l.l_mle, expect, 1e-12);
  EXPECT_EQ(l.l_flow, l.l_mle + cfg.beta * l.l_jsd);
}

TEST(JointStep, BetaZeroStillReportsJsd) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(2));
  Rng rng(10);
  net::OpenSetModel model = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  flow::FlowModel flow(SmallFlow(), rng);
  TrainConfig cfg = FastConfig(2);
  cfg.beta = 0.0;
  JointState state(cfg);
  for (std::size_t step = 0; step < 5; ++step) {
    const LossBreakdown l = JointStep(model, flow, bundle.train.x, bundle.train.y,
                                      flow.BaseNoise(16, rng), cfg, state, step);
    EXPECT_GT(l.l_jsd, 0.0);
    EXPECT_EQ(l.l_flow, l.l_mle);
  }
}

TEST(JointStep, RejectsExtendedHeadAndDimensionMismatch) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(2));
  Rng rng(11);
  net::OpenSetModel model = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kNegative, rng);
  flow::FlowModel flow(SmallFlow(), rng);
  TrainConfig cfg = FastConfig(2);
  JointState state(cfg);
  EXPECT_THROW(JointStep(model, flow, bundle.train.x, bundle.train.y, flow.BaseNoise(4, rng), cfg,
                         state, 0),
               ConfigError);
  flow::FlowConfig wide = SmallFlow();
  wide.dim = 3;
  flow::FlowModel flow3(wide, rng);
  net::OpenSetModel closed = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  EXPECT_THROW(JointStep(closed, flow3, bundle.train.x, bundle.train.y, flow3.BaseNoise(4, rng), cfg,
                         state, 0),
               ShapeError);
}

TEST(FinetuneReal, ZeroStepsPreservesClosedArgmax) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(3));
  Rng rng(12);
  net::OpenSetModel closed = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  TrainConfig cfg = FastConfig(3);
  TrainClosed(closed, bundle.train.x, bundle.train.y, cfg);
  cfg.finetune_steps = 0;
  const net::OpenSetModel ft = FinetuneReal(closed, MixedDataset::FromBundle(bundle), cfg);
  EXPECT_EQ(ft.head.layout(), net::HeadLayout::kNegative);
  Rng probe(13);
  const Tensor x = uno::testing::RandomTensor(Shape{500, 2}, probe, 6.0);
  EXPECT_EQ(net::ArgmaxLabels(closed.Logits(x)), net::ArgmaxLabels(ft.Logits(x), 3));
  const Tensor logits = ft.Logits(x);
  for (std::size_t r = 0; r < 500; ++r) EXPECT_EQ(logits.at(r, 3), 0.0);
}

TEST(FinetuneReal, NegativesScoreHigherAndLossDecreases) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(4));
  Rng rng(14);
  net::OpenSetModel closed = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  TrainConfig cfg = FastConfig(4);
  cfg.steps = 150;
  TrainClosed(closed, bundle.train.x, bundle.train.y, cfg);
  cfg.finetune_steps = 200;
  cfg.backbone_lr = 0.01;
  cfg.log_every = 1;
  TrainLog log;
  const net::OpenSetModel ft = FinetuneReal(closed, MixedDataset::FromBundle(bundle), cfg, &log);

  Rng neg_rng(15);
  const Tensor held_out = synth::SampleNegatives(bundle.spec, 200, neg_rng);
  const auto mean_no = [&](const Tensor& x) {
    const std::vector<double> s = score::Column(score::ScoreInputs(ft, x), score::ScoreKind::kNo);
    double m = 0.0;
    for (double v : s) m += v;
    return m / static_cast<double>(s.size());
  };
  EXPECT_GT(mean_no(held_out), mean_no(bundle.test.x));

  ASSERT_GE(log.rows.size(), 100u);
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    early += log.rows[i].loss.l_cls;
    late += log.rows[80 + i].loss.l_cls;
  }
  EXPECT_LT(late, early);
}

TEST(FinetuneReal, EmptyNegativesRejected) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(5));
  Rng rng(16);
  const net::OpenSetModel closed =
      net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kClosed, rng);
  MixedDataset data = MixedDataset::FromBundle(bundle);
  data.negative_x = Tensor(Shape{0, 2});
  EXPECT_THROW(FinetuneReal(closed, data, FastConfig(5)), ConfigError);
}

TEST(TwoStep, ZeroStepTwoIterationsKeepsNegativeLogitZero) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(6));
  TrainConfig cfg = FastConfig(6);
  cfg.finetune_steps = 0;
  const TrainResult r =
      TwoStepTrain(MixedDataset::FromBundle(bundle), cfg, SmallFeatures(), SmallFlow());
  EXPECT_EQ(r.model.head.layout(), net::HeadLayout::kNegative);
  EXPECT_TRUE(r.flow.frozen());
  const std::vector<score::ScoreTriple> s = score::ScoreInputs(r.model, bundle.test.x);
  const Tensor logits = r.model.Logits(bundle.test.x);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(logits.at(i, 3), 0.0);
    double denom = 1.0;
    for (std::size_t c = 0; c < 3; ++c) denom += std::exp(logits.at(i, c));
    EXPECT_NEAR(s[i].s_no, 1.0 / denom, 1e-14);
  }
}

TEST(TwoStep, BitIdenticalAcrossRuns) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(7));
  const TrainConfig cfg = FastConfig(7);
  const MixedDataset data = MixedDataset::FromBundle(bundle);
  const TrainResult a = TwoStepTrain(data, cfg, SmallFeatures(), SmallFlow());
  const TrainResult b = TwoStepTrain(data, cfg, SmallFeatures(), SmallFlow());
  EXPECT_EQ(a.model.Logits(bundle.test.x), b.model.Logits(bundle.test.x));
  EXPECT_EQ(a.log.Csv(), b.log.Csv());
  const auto pa = a.flow.parameters();
  const auto pb = b.flow.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value(), pb[i]->value());
}

TEST(TwoStep, LogBookkeepingIdentity) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(8));
  TrainConfig cfg = FastConfig(8);
  cfg.log_every = 1;
  const TrainResult r =
      TwoStepTrain(MixedDataset::FromBundle(bundle), cfg, SmallFeatures(), SmallFlow());
  std::size_t joint_rows = 0;
  for (const LogRow& row : r.log.rows) {
    if (row.phase != "step1") continue;
    ++joint_rows;
    EXPECT_EQ(row.loss.l_flow, row.loss.l_mle + cfg.beta * row.loss.l_jsd);
  }
  EXPECT_EQ(joint_rows, cfg.steps);
  EXPECT_EQ(r.log.Csv().substr(0, r.log.Csv().find('\n')),
            "step,phase,l_cls,l_mle,l_jsd,l_flow,accuracy");
}

TEST(NaiveJoint, ReproducibleWithCollapseColumn) {
  const synth::DatasetBundle bundle = synth::MakeImageWide(SmallSpec(9));
  const TrainConfig cfg = FastConfig(9);
  const MixedDataset data = MixedDataset::FromBundle(bundle);
  const TrainResult a = NaiveJointTrain(data, cfg, SmallFeatures(), SmallFlow());
  const TrainResult b = NaiveJointTrain(data, cfg, SmallFeatures(), SmallFlow());
  EXPECT_EQ(a.log.Csv(), b.log.Csv());
  EXPECT_EQ(a.model.head.layout(), net::HeadLayout::kNegative);
  const std::string csv = a.log.Csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,phase,l_cls,l_mle,l_jsd,l_flow,accuracy,collapse_fraction");
  for (const LogRow& row : a.log.rows) {
    ASSERT_TRUE(row.collapse_fraction.has_value());
    EXPECT_GE(*row.collapse_fraction, 0.0);
    EXPECT_LE(*row.collapse_fraction, 1.0);
    EXPECT_EQ(row.loss.l_flow, row.loss.l_mle + cfg.beta * row.loss.l_jsd);
  }
}

TEST(Stats, CollapseFractionAndPairwiseDistance) {
  const Tensor z(Shape{3, 2}, std::vector<double>{0, 0, 3, 4, 0, 0});
  EXPECT_NEAR(MeanPairwiseDistance(z), (5.0 + 0.0 + 5.0) / 3.0, 1e-15);
  Rng rng(17);
  net::OpenSetModel model = net::MakeOpenSetModel(SmallFeatures(), 3, net::HeadLayout::kNegative, rng);
  for (double& v : model.head.weight().value().data()) v = 0.0;
  for (double& v : model.head.bias().value().data()) v = 0.0;
  model.head.bias().value()[3] = 10.0;
  EXPECT_EQ(CollapseFraction(model, uno::testing::RandomTensor(Shape{20, 2}, rng)), 1.0);
  model.head.bias().value()[3] = 0.0;
  EXPECT_EQ(CollapseFraction(model, uno::testing::RandomTensor(Shape{20, 2}, rng)), 0.0);
}

TEST(Schedule, DecayAfterStep) {
  TrainConfig cfg;
  cfg.decay_after = 10;
  cfg.decay_factor = 0.5;
  EXPECT_EQ(ScheduledLr(0.2, 9, cfg), 0.2);
  EXPECT_EQ(ScheduledLr(0.2, 10, cfg), 0.1);
  cfg.decay_after = 0;
  EXPECT_EQ(ScheduledLr(0.2, 1000, cfg), 0.2);
}

}  // namespace
}  // namespace uno::train
