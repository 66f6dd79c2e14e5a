// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uno/errors.h"

namespace uno::metrics {
namespace {

void CheckSet(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) {
    throw ContractError("scores and labels differ in length");
  }
  for (int l : set.labels) {
    if (l != 0 && l != 1) throw ContractError("labels must be 0 or 1");
  }
  for (double s : set.scores) {
    if (!std::isfinite(s)) throw DomainError("scores must be finite");
  }
  if (set.num_positive() == 0 || set.num_negative() == 0) {
    throw DomainError("ranking metrics need at least one positive and one negative");
  }
}

// Distinct thresholds in descending order with cumulative counts of
// positives and negatives scoring >= each threshold.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
};

Sweep MakeSweep(const ScoredSet& set) {
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] > set.scores[b];
  });
  Sweep s;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    (set.labels[idx] == 1 ? tp : fp) += 1;
    const bool last_of_value =
        i + 1 == order.size() || set.scores[order[i + 1]] != set.scores[idx];
    if (last_of_value) {
      s.thresholds.push_back(set.scores[idx]);
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  return s;
}

bool MeetsTarget(std::size_t tp, std::size_t n_pos, double target) {
  // Counts are integers; the slack only absorbs rounding in target * n_pos.
  return static_cast<double>(tp) >= target * static_cast<double>(n_pos) - 1e-9;
}

}  // namespace

std::size_t ScoredSet::num_positive() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredSet::num_negative() const {
  return labels.size() - num_positive();
}

ScoredSet MakeScoredSet(std::span<const double> positives,
                        std::span<const double> negatives) {
  ScoredSet s;
  s.scores.assign(positives.begin(), positives.end());
  s.scores.insert(s.scores.end(), negatives.begin(), negatives.end());
  s.labels.assign(positives.size(), 1);
  s.labels.insert(s.labels.end(), negatives.size(), 0);
  return s;
}

double Auroc(const ScoredSet& set) {
  CheckSet(set);
  const std::size_t n = set.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] < set.scores[b];
  });
  // Twice the midrank sum keeps everything integral until the final divide.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) ++j;
    const double twice_midrank = static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (set.labels[order[t]] == 1) twice_rank_sum += twice_midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(set.num_positive());
  const double nn = static_cast<double>(set.num_negative());
  const double u = 0.5 * twice_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double AveragePrecision(const ScoredSet& set) {
  CheckSet(set);
  const Sweep s = MakeSweep(set);
  const double np = static_cast<double>(set.num_positive());
  double ap = 0.0;
  std::size_t prev_tp = 0;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    if (s.tp[i] == prev_tp) continue;
    const double precision =
        static_cast<double>(s.tp[i]) / static_cast<double>(s.tp[i] + s.fp[i]);
    ap += static_cast<double>(s.tp[i] - prev_tp) / np * precision;
    prev_tp = s.tp[i];
  }
  return ap;
}

double AveragePrecisionStable(const ScoredSet& set) {
  CheckSet(set);
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] > set.scores[b];
  });
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (set.labels[order[i]] == 1) {
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(tp);
}

double FprAtTpr(const ScoredSet& set, double tpr_target) {
  CheckSet(set);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw ContractError("TPR target must lie in (0, 1]");
  }
  const Sweep s = MakeSweep(set);
  const std::size_t np = set.num_positive();
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    if (MeetsTarget(s.tp[i], np, tpr_target)) {
      return static_cast<double>(s.fp[i]) /
             static_cast<double>(set.num_negative());
    }
  }
  return 1.0;
}

std::vector<RocPoint> RocCurve(const ScoredSet& set) {
  CheckSet(set);
  const Sweep s = MakeSweep(set);
  const double np = static_cast<double>(set.num_positive());
  const double nn = static_cast<double>(set.num_negative());
  std::vector<RocPoint> out;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    out.push_back({s.thresholds[i], s.tp[i] / np, s.fp[i] / nn});
  }
  return out;
}

std::vector<PrPoint> PrCurve(const ScoredSet& set) {
  CheckSet(set);
  const Sweep s = MakeSweep(set);
  const double np = static_cast<double>(set.num_positive());
  std::vector<PrPoint> out;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    const double flagged = static_cast<double>(s.tp[i] + s.fp[i]);
    out.push_back({s.thresholds[i], s.tp[i] / np, s.tp[i] / flagged});
  }
  return out;
}

namespace {
std::string Num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

std::string RocCsv(const std::vector<RocPoint>& curve) {
  std::string out = "threshold,tpr,fpr\n";
  for (const RocPoint& p : curve) {
    out += Num(p.threshold) + "," + Num(p.tpr) + "," + Num(p.fpr) + "\n";
  }
  return out;
}

std::string PrCsv(const std::vector<PrPoint>& curve) {
  std::string out = "threshold,recall,precision\n";
  for (const PrPoint& p : curve) {
    out += Num(p.threshold) + "," + Num(p.recall) + "," + Num(p.precision) + "\n";
  }
  return out;
}

double Accuracy(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) throw ShapeError("label maps differ in size");
  if (gt.empty()) throw DomainError("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) hit += pred[i] == gt[i];
  return static_cast<double>(hit) / static_cast<double>(gt.size());
}

double InlierAccuracy(std::span<const int> pred, std::span<const int> gt,
                      int k) {
  if (pred.size() != gt.size()) throw ShapeError("label maps differ in size");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 1 || gt[i] > k) continue;
    ++total;
    hit += pred[i] == gt[i];
  }
  if (total == 0) throw DomainError("no inlier pixels to score");
  return static_cast<double>(hit) / static_cast<double>(total);
}

double MeanIou(std::span<const int> pred, std::span<const int> gt, int k) {
  if (pred.size() != gt.size()) throw ShapeError("label maps differ in size");
  std::vector<std::size_t> inter(k + 1, 0), uni(k + 1, 0), present(k + 1, 0);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    if (g < 1 || g > k) continue;
    ++valid;
    present[g] = 1;
    const int p = pred[i];
    if (p == g) {
      ++inter[g];
      ++uni[g];
    } else {
      ++uni[g];
      if (p >= 1 && p <= k) ++uni[p];
    }
  }
  if (valid == 0) throw DomainError("mIoU needs at least one valid gt pixel");
  double sum = 0.0;
  std::size_t classes = 0;
  for (int c = 1; c <= k; ++c) {
    if (!present[c]) continue;
    sum += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++classes;
  }
  return sum / static_cast<double>(classes);
}

double Pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("Pearson inputs differ in length");
  if (a.size() < 2) throw DomainError("Pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw DomainError("Pearson correlation undefined for zero variance");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricReport Evaluate(const ScoredSet& set) {
  MetricReport r;
  r.auroc = Auroc(set);
  r.ap = AveragePrecision(set);
  r.fpr95 = FprAtTpr(set, 0.95);
  r.n_pos = set.num_positive();
  r.n_neg = set.num_negative();
  return r;
}

nlohmann::ordered_json ToJson(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["auroc"] = r.auroc;
  j["ap"] = r.ap;
  j["fpr95"] = r.fpr95;
  j["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nullptr;
  j["miou"] = r.miou ? nlohmann::ordered_json(*r.miou) : nullptr;
  j["pearson"] = r.pearson ? nlohmann::ordered_json(*r.pearson) : nullptr;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  return j;
}

}  // namespace uno::metrics
