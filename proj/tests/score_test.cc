// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/score.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "support/oracles.h"
#include "support/primitive_cases.h"
#include "uno/errors.h"
#include "uno/model.h"

namespace uno::score {
namespace {

using uno::testing::NaiveSoftmax;
using uno::testing::RandomTensor;

ScoreTriple Scores(const std::vector<double>& logits, std::size_t k,
                   NoObjectPolicy policy = NoObjectPolicy::kInclude) {
  return ScoresFromLogits(logits, k, policy);
}

net::ClassifierHead HeadWithWeights(std::size_t k, net::HeadLayout layout,
                                    const std::vector<double>& w, std::size_t d) {
  Rng rng(1);
  net::ClassifierHead head(d, k, layout, rng);
  head.weight().value() = Tensor(Shape{w.size() / d, d}, w);
  return head;
}

TEST(Scores, HandSoftmaxExamples) {
  const ScoreTriple t = Scores({1, 0, 0}, 2);
  EXPECT_NEAR(t.s_no, 0.21194, 5e-6);
  EXPECT_NEAR(t.s_unc, -0.57612, 5e-6);
  EXPECT_NEAR(t.s_uno, -0.36418, 5e-6);

  const ScoreTriple neg = Scores({0, 0, 9}, 2);
  EXPECT_NEAR(neg.s_no, 0.99975, 5e-6);
  EXPECT_NEAR(neg.s_unc, -0.000123, 5e-7);
  EXPECT_NEAR(neg.s_uno, 0.99963, 5e-6);
}

TEST(Scores, UniformPosterior) {
  const ScoreTriple t = Scores(std::vector<double>(11, 0.3), 10);
  EXPECT_NEAR(t.s_no, 1.0 / 11.0, 1e-15);
  EXPECT_NEAR(t.s_unc, -1.0 / 11.0, 1e-15);
  EXPECT_EQ(t.s_uno, 0.0);
}

TEST(Scores, LimitCases) {
  EXPECT_NEAR(Scores({0, 0, 60}, 2).s_no, 1.0, 1e-15);
  EXPECT_NEAR(Scores({60, 0, 0}, 2).s_unc, -1.0, 1e-15);
}

TEST(Scores, AdditivityBoundsAndShiftInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.UniformInt(6);
    std::vector<double> logits(k + 1 + rng.UniformInt(2));
    for (double& v : logits) v = 4.0 * rng.Normal();
    const ScoreTriple t = Scores(logits, k);
    EXPECT_EQ(t.s_uno, t.s_unc + t.s_no);
    EXPECT_GT(t.s_no, 0.0);
    EXPECT_LT(t.s_no, 1.0);
    EXPECT_GT(t.s_unc, -1.0);
    EXPECT_LT(t.s_unc, 0.0);

    const double shift = 50.0 * rng.Normal();
    std::vector<double> shifted = logits;
    for (double& v : shifted) v += shift;
    const ScoreTriple s = Scores(shifted, k);
    EXPECT_NEAR(s.s_no, t.s_no, 1e-12);
    EXPECT_NEAR(s.s_unc, t.s_unc, 1e-12);
    EXPECT_NEAR(s.s_uno, t.s_uno, 1e-12);
  }
}

TEST(Scores, MatchNaiveSoftmax) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(5);
    for (double& v : logits) v = 2.0 * rng.Normal();
    const std::vector<double> p = NaiveSoftmax(logits);
    const ScoreTriple t = Scores(logits, 3);  // K+2 layout, no-object included
    EXPECT_NEAR(t.s_no, p[3], 1e-14);
    EXPECT_NEAR(t.s_unc, -std::max({p[0], p[1], p[2]}), 1e-14);

    const std::vector<double> q = NaiveSoftmax({logits[0], logits[1], logits[2], logits[3]});
    const ScoreTriple e = Scores(logits, 3, NoObjectPolicy::kExclude);
    EXPECT_NEAR(e.s_no, q[3], 1e-14);
    EXPECT_NEAR(e.s_unc, -std::max({q[0], q[1], q[2]}), 1e-14);
  }
}

TEST(Scores, Monotonicity) {
  std::vector<double> logits = {0.3, -0.2, 0.1};
  double prev_no = 0.0, prev_conf = 0.0;
  for (int i = 0; i < 20; ++i) {
    logits[2] = -3.0 + 0.3 * i;
    const double no = Scores(logits, 2).s_no;
    EXPECT_GT(no, prev_no);
    prev_no = no;
  }
  logits[2] = 0.0;
  for (int i = 0; i < 20; ++i) {
    logits[0] = 0.5 + 0.3 * i;  // stays the winning inlier logit
    const double conf = -Scores(logits, 2).s_unc;
    EXPECT_GT(conf, prev_conf);
    prev_conf = conf;
  }
}

TEST(Scores, HeadWithoutNegativeClassIsRejected) {
  Rng rng(5);
  const net::ClassifierHead closed(4, 3, net::HeadLayout::kClosed, rng);
  const net::ClassifierHead dense_closed(4, 3, net::HeadLayout::kDenseClosed, rng);
  const Tensor z(Shape{2, 4}, 0.5);
  EXPECT_THROW(ScoreFeatures(z, closed), ConfigError);
  EXPECT_THROW(ScoreFeatures(z, dense_closed), ConfigError);
  EXPECT_THROW(Scores({1, 2}, 2), ConfigError);
}

TEST(Scores, NormLawAlongFixedDirections) {
  Rng rng(6);
  net::ClassifierHead head(8, 3, net::HeadLayout::kNegative, rng);
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor dir = RandomTensor(Shape{1, 8}, rng);
    const Tensor logits = head.Logits(dir);
    const auto row = logits.data();
    const std::size_t winner = std::max_element(row.begin(), row.begin() + 3) - row.begin();
    if (*std::max_element(row.begin(), row.end()) != row[winner]) continue;
    ++checked;
    double prev = 0.0;
    for (double scale : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      Tensor z = dir;
      for (double& v : z.data()) v *= scale;
      const double conf = -ScoreFeatures(z, head)[0].s_unc;
      EXPECT_GE(conf, prev);
      prev = conf;
    }
  }
  EXPECT_GT(checked, 20u);
}

TEST(Select, PicksComponent) {
  const ScoreTriple t{0.25, -0.5, -0.25};
  EXPECT_EQ(Select(t, ScoreKind::kNo), 0.25);
  EXPECT_EQ(Select(t, ScoreKind::kUnc), -0.5);
  EXPECT_EQ(Select(t, ScoreKind::kUno), -0.25);
  EXPECT_EQ(ParseScoreKind("uno"), ScoreKind::kUno);
  EXPECT_THROW(ParseScoreKind("msp"), ConfigError);
}

TEST(DenseUno, SingleFullMaskIsConstant) {
  Rng rng(7);
  const net::ClassifierHead head(4, 2, net::HeadLayout::kDense, rng);
  const Tensor z = RandomTensor(Shape{1, 4}, rng);
  const Tensor masks(Shape{1, 3, 5}, 1.0);
  const Tensor map = DenseUno(masks, z, head);
  const double expected = ScoreFeatures(z, head)[0].s_uno;
  ASSERT_EQ(map.shape(), (Shape{3, 5}));
  for (double v : map.data()) EXPECT_EQ(v, expected);
}

TEST(DenseUno, ZeroMasksGiveZero) {
  Rng rng(8);
  const net::ClassifierHead head(4, 2, net::HeadLayout::kDense, rng);
  const Tensor map = DenseUno(Tensor(Shape{3, 4, 4}, 0.0), RandomTensor(Shape{3, 4}, rng), head);
  for (double v : map.data()) EXPECT_EQ(v, 0.0);
}

TEST(DenseUno, MatchesPerPixelLoop) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.UniformInt(8);
    const std::size_t h = 1 + rng.UniformInt(16), w = 1 + rng.UniformInt(16);
    const net::ClassifierHead head(5, 3, net::HeadLayout::kDense, rng);
    const Tensor z = RandomTensor(Shape{n, 5}, rng);
    Tensor masks(Shape{n, h, w});
    for (double& v : masks.data()) v = rng.Uniform();
    const Tensor map = DenseUno(masks, z, head);
    const std::vector<ScoreTriple> per_mask = ScoreFeatures(z, head);
    for (std::size_t p = 0; p < h * w; ++p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += masks.data()[i * h * w + p] * per_mask[i].s_uno;
      EXPECT_EQ(map.data()[p], acc);
    }
  }
}

TEST(DenseUno, HardNoObjectMaskGivesThatQueriesScore) {
  // One query owns the pixel with a hard mask and an overwhelming no-object
  // logit; the map reports that query's own s_uno, nothing special-cased.
  const net::ClassifierHead head = HeadWithWeights(
      2, net::HeadLayout::kDense, {0, 0, 0, 0, 0, 0, 30, 0}, 2);
  const Tensor z(Shape{1, 2}, std::vector<double>{1.0, 0.0});
  const Tensor masks(Shape{1, 1, 1}, 1.0);
  const double v = DenseUno(masks, z, head).data()[0];
  const ScoreTriple t = ScoreFeatures(z, head)[0];
  EXPECT_EQ(v, t.s_unc + t.s_no);
  EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(DenseUno, CountMismatchThrows) {
  Rng rng(10);
  const net::ClassifierHead head(4, 2, net::HeadLayout::kDense, rng);
  EXPECT_THROW(DenseUno(Tensor(Shape{2, 3, 3}, 0.5), RandomTensor(Shape{3, 4}, rng), head),
               ShapeError);
}

TEST(Aggregate, ComponentsAggregateIndependently) {
  const Tensor masks(Shape{2, 1, 2}, std::vector<double>{1.0, 0.5, 0.0, 0.5});
  const std::vector<ScoreTriple> t = {{0.2, -0.6, -0.4}, {0.8, -0.1, 0.7}};
  const DenseScoreMaps m = AggregateMaskScores(masks, t);
  EXPECT_DOUBLE_EQ(m.s_no.data()[0], 0.2);
  EXPECT_DOUBLE_EQ(m.s_no.data()[1], 0.5);
  EXPECT_DOUBLE_EQ(m.s_unc.data()[1], -0.35);
  EXPECT_DOUBLE_EQ(m.s_uno.data()[1], 0.15);
}

TEST(Geometry, AnglesAndHomogeneity) {
  const net::ClassifierHead head =
      HeadWithWeights(2, net::HeadLayout::kNegative, {1, 0, 0, 1, 1, 1}, 2);
  const std::vector<double> parallel = {2.0, 2.0};
  const std::vector<double> perpendicular = {1.0, -1.0};
  EXPECT_NEAR(Geometry(parallel, head).angle_to_negative, 0.0, 1e-7);
  EXPECT_NEAR(Geometry(perpendicular, head).angle_to_negative, std::numbers::pi / 2, 1e-12);
  const GeometryDiag a = Geometry(std::vector<double>{0.3, -2.0}, head);
  const GeometryDiag b = Geometry(std::vector<double>{0.6, -4.0}, head);
  EXPECT_NEAR(a.angle_to_negative, b.angle_to_negative, 1e-12);
  EXPECT_NEAR(b.feature_norm, 2.0 * a.feature_norm, 1e-12);
  EXPECT_EQ(a.winning_inlier_class, 1);
  EXPECT_EQ(Geometry(std::vector<double>{-1.0, 3.0}, head).winning_inlier_class, 2);
  EXPECT_NEAR(Geometry(std::vector<double>{0.0, 0.0}, head).angle_to_negative,
              std::numbers::pi / 2, 1e-15);
}

TEST(Geometry, ZeroNegativeVectorThrows) {
  const net::ClassifierHead head =
      HeadWithWeights(2, net::HeadLayout::kNegative, {1, 0, 0, 1, 0, 0}, 2);
  EXPECT_THROW(Geometry(std::vector<double>{1.0, 1.0}, head), DomainError);
}

TEST(ComponentCorrelation, SignedExtremes) {
  const std::vector<ScoreTriple> same = {{0.1, -0.1, 0}, {0.2, -0.2, 0}, {0.4, -0.3, 0}};
  EXPECT_LT(ComponentCorrelation(same), -0.9);
  const std::vector<ScoreTriple> up = {{0.1, -0.9, 0}, {0.2, -0.8, 0}, {0.3, -0.7, 0}};
  EXPECT_NEAR(ComponentCorrelation(up), 1.0, 1e-12);
  const std::vector<ScoreTriple> flat = {{0.1, -0.5, 0}, {0.2, -0.5, 0}};
  EXPECT_THROW(ComponentCorrelation(flat), DomainError);
}

}  // namespace
}  // namespace uno::score
