// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Outlier scores over a head with a negative class. Higher means more
// outlier-like.
//
//   s_no  = P(K+1 | z)                  negative objectness
//   s_unc = -max_{k <= K} P(k | z)      uncertainty
//   s_uno = s_unc + s_no
//
// Probabilities are one softmax over the inlier logits and the negative
// logit (and, for dense heads under the default policy, the no-object
// logit). Logits include the head bias.

#ifndef UNO_SCORE_H_
#define UNO_SCORE_H_

#include <span>
#include <string>
#include <vector>

#include "uno/model.h"
#include "uno/tensor.h"

namespace uno::score {

struct ScoreTriple {
  double s_no = 0.0;
  double s_unc = 0.0;
  double s_uno = 0.0;
};

enum class NoObjectPolicy {
  kInclude,  // no-object logit stays in the softmax denominator
  kExclude,  // softmax over classes 1..K+1 only
};

std::string_view NoObjectPolicyName(NoObjectPolicy p);
NoObjectPolicy ParseNoObjectPolicy(std::string_view name);

enum class ScoreKind { kUno, kUnc, kNo };
std::string_view ScoreKindName(ScoreKind s);
ScoreKind ParseScoreKind(std::string_view name);
double Select(const ScoreTriple& t, ScoreKind kind);

// Scores for one logit row. `k` inlier classes occupy columns [0, k) and
// the negative class column k. A no-object column k+1 is present iff
// logits.size() == k + 2; it only enters the denominator under kInclude.
ScoreTriple ScoresFromLogits(std::span<const double> logits, std::size_t k,
                             NoObjectPolicy policy = NoObjectPolicy::kInclude);

// Row-wise on [batch, C] logits; the head must carry a negative class or a
// ConfigError is thrown.
std::vector<ScoreTriple> ScoreLogits(const Tensor& logits,
                                     const net::ClassifierHead& head,
                                     NoObjectPolicy policy = NoObjectPolicy::kInclude);

// Scores of pre-logit rows z [batch, d].
std::vector<ScoreTriple> ScoreFeatures(const Tensor& z,
                                       const net::ClassifierHead& head,
                                       NoObjectPolicy policy = NoObjectPolicy::kInclude);
ScoreTriple ScoreFeature(std::span<const double> z,
                         const net::ClassifierHead& head,
                         NoObjectPolicy policy = NoObjectPolicy::kInclude);

// Convenience: features then scores.
std::vector<ScoreTriple> ScoreInputs(const net::OpenSetModel& model,
                                     const Tensor& x,
                                     NoObjectPolicy policy = NoObjectPolicy::kInclude);

std::vector<double> Column(const std::vector<ScoreTriple>& scores,
                           ScoreKind kind);

// Per-pixel score[p] = sum_i masks[i, p] * triple_i, for masks [N, H, W] (or
// [N, P]) and one triple per mask; the output has the mask's spatial shape.
// Each of s_no, s_unc, s_uno is aggregated independently.
struct DenseScoreMaps {
  Tensor s_no;
  Tensor s_unc;
  Tensor s_uno;
};
DenseScoreMaps AggregateMaskScores(const Tensor& masks,
                                   const std::vector<ScoreTriple>& per_mask);

// Dense UNO from masks and per-mask pre-logits [N, d] under a K+2 head.
Tensor DenseUno(const Tensor& masks, const Tensor& mask_prelogits,
                const net::ClassifierHead& head,
                NoObjectPolicy policy = NoObjectPolicy::kInclude);

struct GeometryDiag {
  double feature_norm = 0.0;
  double angle_to_negative = 0.0;  // radians in [0, pi]
  int winning_inlier_class = 1;    // 1-based
};

// Throws DomainError if the negative class vector is zero. A zero z has an
// undefined direction and is reported at angle pi/2.
GeometryDiag Geometry(std::span<const double> z, const net::ClassifierHead& head);
std::vector<GeometryDiag> Geometry(const Tensor& z,
                                   const net::ClassifierHead& head);

// Pearson correlation of the s_unc and s_no columns.
double ComponentCorrelation(const std::vector<ScoreTriple>& scores);

}  // namespace uno::score

#endif  // UNO_SCORE_H_
