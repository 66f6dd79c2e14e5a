// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/score.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uno/errors.h"
#include "uno/metrics.h"

namespace uno::score {

std::string_view NoObjectPolicyName(NoObjectPolicy p) {
  return p == NoObjectPolicy::kInclude ? "include" : "exclude";
}

NoObjectPolicy ParseNoObjectPolicy(std::string_view name) {
  if (name == "include") return NoObjectPolicy::kInclude;
  if (name == "exclude") return NoObjectPolicy::kExclude;
  throw ConfigError("unknown no-object policy '" + std::string(name) +
                    "' (expected include or exclude)");
}

std::string_view ScoreKindName(ScoreKind s) {
  switch (s) {
    case ScoreKind::kUno: return "uno";
    case ScoreKind::kUnc: return "unc";
    case ScoreKind::kNo: return "no";
  }
  return "uno";
}

ScoreKind ParseScoreKind(std::string_view name) {
  if (name == "uno") return ScoreKind::kUno;
  if (name == "unc") return ScoreKind::kUnc;
  if (name == "no") return ScoreKind::kNo;
  throw ConfigError("unknown score '" + std::string(name) +
                    "' (expected uno, unc or no)");
}

double Select(const ScoreTriple& t, ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kUno: return t.s_uno;
    case ScoreKind::kUnc: return t.s_unc;
    case ScoreKind::kNo: return t.s_no;
  }
  return t.s_uno;
}

ScoreTriple ScoresFromLogits(std::span<const double> logits, std::size_t k,
                             NoObjectPolicy policy) {
  if (k == 0) throw ConfigError("scores need at least one inlier class");
  if (logits.size() != k + 1 && logits.size() != k + 2) {
    throw ConfigError("scores need K+1 or K+2 logits (K=" + std::to_string(k) +
                      "), got " + std::to_string(logits.size()));
  }
  const std::size_t n = (logits.size() == k + 2 &&
                         policy == NoObjectPolicy::kInclude)
                            ? k + 2
                            : k + 1;
  const std::vector<double> p = net::Softmax(logits.first(n));
  ScoreTriple t;
  t.s_no = p[k];
  t.s_unc = -*std::max_element(p.begin(), p.begin() + k);
  t.s_uno = t.s_unc + t.s_no;
  return t;
}

std::vector<ScoreTriple> ScoreLogits(const Tensor& logits,
                                     const net::ClassifierHead& head,
                                     NoObjectPolicy policy) {
  head.negative_column();
  if (logits.rank() != 2 || logits.dim(1) != head.num_classes()) {
    throw ShapeError("logits shape " + ShapeToString(logits.shape()) +
                     " does not match a " +
                     std::to_string(head.num_classes()) + "-class head");
  }
  const std::size_t c = logits.dim(1);
  std::vector<ScoreTriple> out(logits.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = ScoresFromLogits(logits.data().subspan(r * c, c),
                              head.num_inlier(), policy);
  }
  return out;
}

std::vector<ScoreTriple> ScoreFeatures(const Tensor& z,
                                       const net::ClassifierHead& head,
                                       NoObjectPolicy policy) {
  return ScoreLogits(head.Logits(z), head, policy);
}

ScoreTriple ScoreFeature(std::span<const double> z,
                         const net::ClassifierHead& head,
                         NoObjectPolicy policy) {
  Tensor row(Shape{1, z.size()}, std::vector<double>(z.begin(), z.end()));
  return ScoreFeatures(row, head, policy).front();
}

std::vector<ScoreTriple> ScoreInputs(const net::OpenSetModel& model,
                                     const Tensor& x, NoObjectPolicy policy) {
  return ScoreLogits(model.Logits(x), model.head, policy);
}

std::vector<double> Column(const std::vector<ScoreTriple>& scores,
                           ScoreKind kind) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = Select(scores[i], kind);
  return out;
}

DenseScoreMaps AggregateMaskScores(const Tensor& masks,
                                   const std::vector<ScoreTriple>& per_mask) {
  if (masks.rank() < 2) {
    throw ShapeError("masks must be [N, ...], got " +
                     ShapeToString(masks.shape()));
  }
  const std::size_t n = masks.dim(0);
  if (n != per_mask.size()) {
    throw ShapeError("mask count " + std::to_string(n) +
                     " does not match score count " +
                     std::to_string(per_mask.size()));
  }
  const Shape spatial(masks.shape().begin() + 1, masks.shape().end());
  const std::size_t pixels = NumElements(spatial);
  DenseScoreMaps out{Tensor(spatial), Tensor(spatial), Tensor(spatial)};
  for (std::size_t i = 0; i < n; ++i) {
    const double* m = masks.data().data() + i * pixels;
    const ScoreTriple& t = per_mask[i];
    for (std::size_t p = 0; p < pixels; ++p) {
      out.s_no[p] += m[p] * t.s_no;
      out.s_unc[p] += m[p] * t.s_unc;
      out.s_uno[p] += m[p] * t.s_uno;
    }
  }
  return out;
}

Tensor DenseUno(const Tensor& masks, const Tensor& mask_prelogits,
                const net::ClassifierHead& head, NoObjectPolicy policy) {
  if (head.layout() != net::HeadLayout::kDense) {
    throw ConfigError("dense UNO needs a K+2-way head");
  }
  if (mask_prelogits.rank() != 2 || masks.rank() < 2 ||
      mask_prelogits.dim(0) != masks.dim(0)) {
    throw ShapeError("mask count mismatch: masks " +
                     ShapeToString(masks.shape()) + ", pre-logits " +
                     ShapeToString(mask_prelogits.shape()));
  }
  return AggregateMaskScores(masks, ScoreFeatures(mask_prelogits, head, policy))
      .s_uno;
}

GeometryDiag Geometry(std::span<const double> z,
                      const net::ClassifierHead& head) {
  const std::size_t neg = head.negative_column();
  const Tensor& w = head.weight().value();
  if (z.size() != head.feature_dim()) {
    throw ShapeError("feature has " + std::to_string(z.size()) +
                     " entries, head expects " +
                     std::to_string(head.feature_dim()));
  }
  double zz = 0.0, ww = 0.0, zw = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    zz += z[j] * z[j];
    ww += w.at(neg, j) * w.at(neg, j);
    zw += z[j] * w.at(neg, j);
  }
  if (ww == 0.0) {
    throw DomainError("negative class vector is zero; angle undefined");
  }
  GeometryDiag g;
  g.feature_norm = std::sqrt(zz);
  if (zz == 0.0) {
    g.angle_to_negative = std::numbers::pi / 2;
  } else {
    const double c = std::clamp(zw / (std::sqrt(zz) * std::sqrt(ww)), -1.0, 1.0);
    g.angle_to_negative = std::acos(c);
  }
  const Tensor& b = head.bias().value();
  std::size_t best = 0;
  double best_logit = 0.0;
  for (std::size_t c = 0; c < head.num_inlier(); ++c) {
    double logit = b[c];
    for (std::size_t j = 0; j < z.size(); ++j) logit += w.at(c, j) * z[j];
    if (c == 0 || logit > best_logit) {
      best = c;
      best_logit = logit;
    }
  }
  g.winning_inlier_class = static_cast<int>(best) + 1;
  return g;
}

std::vector<GeometryDiag> Geometry(const Tensor& z,
                                   const net::ClassifierHead& head) {
  if (z.rank() != 2) {
    throw ShapeError("features must be [batch, d], got " +
                     ShapeToString(z.shape()));
  }
  std::vector<GeometryDiag> out(z.dim(0));
  const std::size_t d = z.dim(1);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = Geometry(z.data().subspan(r * d, d), head);
  }
  return out;
}

double ComponentCorrelation(const std::vector<ScoreTriple>& scores) {
  return metrics::Pearson(Column(scores, ScoreKind::kUnc),
                          Column(scores, ScoreKind::kNo));
}

}  // namespace uno::score
