// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Detection and segmentation metrics. Positives (label 1) are outliers;
// a sample is flagged when score >= threshold.

#ifndef UNO_METRICS_H_
#define UNO_METRICS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace uno::metrics {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = positive (outlier), 0 = negative

  std::size_t num_positive() const;
  std::size_t num_negative() const;
};

// Concatenates `positives` (label 1) and `negatives` (label 0).
ScoredSet MakeScoredSet(std::span<const double> positives,
                        std::span<const double> negatives);

// Mann-Whitney statistic with midranks: P(pos > neg) + 0.5 P(pos == neg).
double Auroc(const ScoredSet& set);

// Area under the step PR curve taken over distinct thresholds:
// sum_t (R_t - R_{t-1}) P_t. Tied scores enter together.
double AveragePrecision(const ScoredSet& set);

// Mean precision at each positive when samples are ranked by descending
// score, ties kept in input order (stable sort).
double AveragePrecisionStable(const ScoredSet& set);

// FPR at the largest threshold t with TPR(score >= t) >= tpr_target.
double FprAtTpr(const ScoredSet& set, double tpr_target = 0.95);

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};
struct PrPoint {
  double threshold;
  double recall;
  double precision;
};
// One point per distinct score, descending thresholds.
std::vector<RocPoint> RocCurve(const ScoredSet& set);
std::vector<PrPoint> PrCurve(const ScoredSet& set);
std::string RocCsv(const std::vector<RocPoint>& curve);
std::string PrCsv(const std::vector<PrPoint>& curve);

// Dense label maps hold 1..K for inlier classes; anything else (0 = void,
// K+1 = outlier) is excluded from accuracy and mIoU on the gt side.
inline constexpr int kVoidLabel = 0;

double Accuracy(std::span<const int> pred, std::span<const int> gt);
// Accuracy restricted to pixels whose gt label is in 1..k.
double InlierAccuracy(std::span<const int> pred, std::span<const int> gt, int k);
// Mean IoU over inlier classes present in the valid gt pixels.
double MeanIou(std::span<const int> pred, std::span<const int> gt, int k);

double Pearson(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  double auroc = 0.0;
  double ap = 0.0;
  double fpr95 = 0.0;
  std::optional<double> accuracy;
  std::optional<double> miou;
  std::optional<double> pearson;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

MetricReport Evaluate(const ScoredSet& set);
// Fixed keys auroc, ap, fpr95, accuracy, miou, pearson, n_pos, n_neg; absent
// optionals are null.
nlohmann::ordered_json ToJson(const MetricReport& r);

}  // namespace uno::metrics

#endif  // UNO_METRICS_H_
