// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/mask_seg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "uno/errors.h"
#include "uno/metrics.h"

namespace uno::seg {

using grad::Parameter;
using grad::Tape;
using grad::Var;

namespace {

constexpr double kAreaEps = 1e-6;

double Softplus(double a) {
  return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

// BCE of sigmoid(a) against y in {0, 1}, from the logit.
double BceFromLogit(double a, double y) { return Softplus(a) - y * a; }

std::vector<double> LogSoftmaxRow(const Tensor& logits, std::size_t row) {
  const std::size_t c = logits.dim(1);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, logits.at(row, j));
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) s += std::exp(logits.at(row, j) - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(c);
  for (std::size_t j = 0; j < c; ++j) out[j] = logits.at(row, j) - lse;
  return out;
}

std::vector<bool> ValidPixels(const synth::DenseScene& scene) {
  std::vector<bool> valid(scene.num_pixels());
  for (std::size_t p = 0; p < valid.size(); ++p) {
    valid[p] = scene.labels[p] != metrics::kVoidLabel;
  }
  return valid;
}

void CheckLabels(const synth::DenseScene& scene, const net::ClassifierHead& head) {
  const int max_label = static_cast<int>(head.num_inlier()) + (head.has_negative() ? 1 : 0);
  for (int y : scene.labels) {
    if (y < 0 || y > max_label) {
      throw ContractError("scene label " + std::to_string(y) +
                          " outside the head taxonomy 0.." + std::to_string(max_label));
    }
  }
}

MaskSet MaskSetFromForward(const DenseModel& model, const DenseForward& fwd,
                           std::size_t height, std::size_t width) {
  MaskSet s;
  s.k = model.num_inlier();
  s.layout = model.head.layout();
  s.height = height;
  s.width = width;
  s.queries = model.queries.value();
  s.embed = fwd.embed.value();
  s.mask_logits = fwd.mask_logits.value();
  s.masks = fwd.masks.value().Reshaped(Shape{fwd.masks.shape()[0], height, width});
  s.prelogits = fwd.prelogits.value();
  s.logits = fwd.logits.value();
  s.posteriors = net::Softmax(s.logits);
  return s;
}

double InlierPixelAccuracy(const std::vector<int>& pred, const std::vector<int>& gt,
                           std::size_t k) {
  std::size_t hit = 0, total = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt[p] < 1 || gt[p] > static_cast<int>(k)) continue;
    ++total;
    hit += pred[p] == gt[p];
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

// Shuffled pass over scene indices.
class SceneOrder {
 public:
  SceneOrder(std::size_t n, Rng rng) : order_(n), cursor_(n), rng_(rng) {
    if (n == 0) throw ConfigError("no training scenes");
    std::iota(order_.begin(), order_.end(), 0);
  }
  std::size_t Next() {
    if (cursor_ == order_.size()) {
      for (std::size_t j = order_.size(); j > 1; --j) {
        std::swap(order_[j - 1], order_[rng_.UniformInt(j)]);
      }
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  Rng rng_;
};

Tensor OneHotRows(const std::vector<std::size_t>& columns, std::size_t c) {
  Tensor t(Shape{columns.size(), c});
  for (std::size_t i = 0; i < columns.size(); ++i) t.at(i, columns[i]) = 1.0;
  return t;
}

// Mean over rows of -log_softmax(logits)[row, column[row]], restricted to rows
// with weight 1 in `rows` (all rows when empty).
Var MaskedCrossEntropy(Tape& tape, Var logits, const std::vector<std::size_t>& columns,
                       const std::vector<bool>& rows) {
  const std::size_t n = columns.size();
  const std::size_t c = logits.shape()[1];
  Tensor w = OneHotRows(columns, c);
  std::size_t used = n;
  if (!rows.empty()) {
    used = static_cast<std::size_t>(std::count(rows.begin(), rows.end(), true));
    for (std::size_t i = 0; i < n; ++i) {
      if (!rows[i]) {
        for (std::size_t j = 0; j < c; ++j) w.at(i, j) = 0.0;
      }
    }
  }
  if (used == 0) return tape.Scalar(0.0);
  return grad::Scale(grad::Sum(grad::Mul(grad::LogSoftmax(logits), tape.Constant(w))),
                     -1.0 / static_cast<double>(used));
}

Var MaskTerm(Tape& tape, Var mask_logits, const std::vector<Segment>& targets,
             const Assignment& assignment, const std::vector<bool>& valid) {
  const std::size_t n = mask_logits.shape()[0];
  const std::size_t p = mask_logits.shape()[1];
  const std::size_t n_valid =
      valid.empty() ? p : static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  const std::size_t matched = targets.size();
  if (matched == 0 || n_valid == 0) return tape.Scalar(0.0);
  Tensor y(Shape{n, p});
  Tensor w(Shape{n, p});
  const double weight = 1.0 / (static_cast<double>(n_valid) * static_cast<double>(matched));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const std::size_t q = assignment.query_for_target[t];
    for (std::size_t px = 0; px < p; ++px) {
      if (valid.empty() || valid[px]) w.at(q, px) = weight;
    }
    for (std::size_t px : targets[t].pixels) y.at(q, px) = 1.0;
  }
  const Var bce = grad::Sub(grad::Softplus(mask_logits),
                            grad::Mul(tape.Constant(std::move(y)), mask_logits));
  return grad::Sum(grad::Mul(bce, tape.Constant(std::move(w))));
}

template <typename T>
void ReadKey(const Json& v, const std::string& key, T& out) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    out = v.get<double>();
  } else {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    out = v.template get<T>();
  }
}

using Groups = std::vector<std::pair<std::vector<Parameter*>, double>>;

}  // namespace

Json ToJson(const DenseModelConfig& c) {
  Json j;
  j["in_dim"] = c.in_dim;
  j["pixel_hidden"] = c.pixel_hidden;
  j["embed_dim"] = c.embed_dim;
  j["num_queries"] = c.num_queries;
  j["mask_hidden"] = c.mask_hidden;
  j["feature_dim"] = c.feature_dim;
  j["query_init_sd"] = c.query_init_sd;
  return j;
}

DenseModel::DenseModel(const DenseModelConfig& config, std::size_t k, Rng& rng)
    : pixel_mlp("pixel", {config.in_dim, config.pixel_hidden, config.embed_dim},
                nn::Activation::kTanh, nn::Activation::kIdentity, rng),
      queries("queries", Tensor(Shape{config.num_queries, config.embed_dim})),
      mask_mlp("mask", {2 * config.embed_dim + 1, config.mask_hidden, config.feature_dim},
               nn::Activation::kTanh, nn::Activation::kTanh, rng),
      head(config.feature_dim, k, net::HeadLayout::kDenseClosed, rng, "head"),
      config_(config) {
  if (config.num_queries == 0 || config.embed_dim == 0 || config.in_dim == 0) {
    throw ConfigError("dense model dimensions must be positive");
  }
  if (!(config.query_init_sd > 0.0)) throw ConfigError("query_init_sd must be > 0");
  for (double& v : queries.value().data()) v = config.query_init_sd * rng.Normal();
}

DenseForward DenseModel::Forward(Tape& tape, const Tensor& pixels) const {
  if (pixels.rank() != 2 || pixels.dim(1) != config_.in_dim) {
    throw ShapeError("dense model expects pixel rows [P, " +
                     std::to_string(config_.in_dim) + "], got " +
                     ShapeToString(pixels.shape()));
  }
  const std::size_t n = config_.num_queries;
  const double num_pixels = static_cast<double>(pixels.dim(0));
  DenseForward f;
  f.embed = pixel_mlp.Forward(tape, tape.Constant(pixels));
  const Var q = tape.Param(queries);
  f.mask_logits = grad::MatMul(q, grad::Transpose(f.embed));
  f.masks = grad::Sigmoid(f.mask_logits);
  const Var area = grad::SumLastAxis(f.masks);  // [N]
  const Var inv_area = grad::Exp(grad::Neg(grad::Log(grad::AddScalar(area, kAreaEps))));
  const Var pooled = grad::Transpose(
      grad::Mul(grad::Transpose(grad::MatMul(f.masks, f.embed)), inv_area));
  const Var coverage = grad::Reshape(grad::Scale(area, 1.0 / num_pixels), Shape{n, 1});
  f.prelogits = mask_mlp.Forward(tape, grad::Concat({q, pooled, coverage}));
  f.logits = head.Forward(tape, f.prelogits);
  return f;
}

std::vector<Parameter*> DenseModel::backbone_parameters() {
  std::vector<Parameter*> out = pixel_mlp.parameters();
  out.push_back(&queries);
  for (Parameter* p : mask_mlp.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> DenseModel::parameters() {
  std::vector<Parameter*> out = backbone_parameters();
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> DenseModel::parameters() const {
  std::vector<Parameter*> all = const_cast<DenseModel*>(this)->parameters();
  return {all.begin(), all.end()};
}

MaskSet PredictMasks(const DenseModel& model, const synth::DenseScene& scene) {
  Tape tape;
  const DenseForward fwd = model.Forward(tape, scene.PixelRows());
  return MaskSetFromForward(model, fwd, scene.height(), scene.width());
}

std::vector<int> SemanticSegment(const MaskSet& set) {
  const std::size_t n = set.num_queries();
  const std::size_t p = set.num_pixels();
  if (set.masks.size() != n * p || set.posteriors.dim(0) != n ||
      set.posteriors.dim(1) < set.k) {
    throw ShapeError("mask set is inconsistent");
  }
  const auto m = set.masks.data();
  std::vector<int> out(p, 1);
  std::vector<double> acc(set.k);
  for (std::size_t px = 0; px < p; ++px) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = m[i * p + px];
      for (std::size_t c = 0; c < set.k; ++c) acc[c] += w * set.posteriors.at(i, c);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < set.k; ++c) {
      if (acc[c] > acc[best]) best = c;
    }
    out[px] = static_cast<int>(best) + 1;
  }
  return out;
}

std::vector<Segment> SemanticTargets(const synth::DenseScene& scene) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t p = 0; p < scene.labels.size(); ++p) {
    if (scene.labels[p] != metrics::kVoidLabel) by_label[scene.labels[p]].push_back(p);
  }
  std::vector<Segment> out;
  for (auto& [label, pixels] : by_label) out.push_back({label, std::move(pixels)});
  return out;
}

std::vector<Segment> ToSegments(const std::vector<synth::Region>& regions) {
  std::vector<Segment> out;
  for (const synth::Region& r : regions) out.push_back({r.label, r.pixels});
  return out;
}

std::size_t ColumnForLabel(net::HeadLayout layout, std::size_t k, int label) {
  if (label >= 1 && label <= static_cast<int>(k)) return static_cast<std::size_t>(label - 1);
  const bool negative =
      layout == net::HeadLayout::kNegative || layout == net::HeadLayout::kDense;
  if (label == static_cast<int>(k) + 1 && negative) return k;
  throw ContractError("label " + std::to_string(label) + " has no column in the " +
                      std::string(net::HeadLayoutName(layout)) + " head");
}

Tensor MatchingCostFromLogProbs(const Tensor& target_log_probs,
                                const Tensor& mask_logits,
                                const std::vector<Segment>& targets,
                                const std::vector<bool>& valid) {
  const std::size_t t_count = targets.size();
  const std::size_t n = mask_logits.dim(0);
  const std::size_t p = mask_logits.dim(1);
  if (target_log_probs.dim(0) != t_count || target_log_probs.dim(1) != n) {
    throw ShapeError("log-probabilities must be [targets, queries]");
  }
  if (!valid.empty() && valid.size() != p) throw ShapeError("valid mask size mismatch");
  const std::size_t n_valid =
      valid.empty() ? p : static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  Tensor cost(Shape{t_count, n});
  std::vector<double> indicator(p);
  for (std::size_t t = 0; t < t_count; ++t) {
    std::fill(indicator.begin(), indicator.end(), 0.0);
    for (std::size_t px : targets[t].pixels) indicator.at(px) = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double bce = 0.0;
      for (std::size_t px = 0; px < p; ++px) {
        if (valid.empty() || valid[px]) bce += BceFromLogit(mask_logits.at(i, px), indicator[px]);
      }
      cost.at(t, i) = -target_log_probs.at(t, i) +
                      (n_valid == 0 ? 0.0 : bce / static_cast<double>(n_valid));
    }
  }
  return cost;
}

Tensor MatchingCost(const MaskSet& set, const std::vector<Segment>& targets,
                    const std::vector<bool>& valid) {
  const std::size_t n = set.num_queries();
  Tensor lp(Shape{targets.size(), n});
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> row = LogSoftmaxRow(set.logits, i);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      lp.at(t, i) = row[ColumnForLabel(set.layout, set.k, targets[t].label)];
    }
  }
  return MatchingCostFromLogProbs(lp, set.mask_logits, targets, valid);
}

Assignment Hungarian(const Tensor& cost) {
  if (cost.rank() != 2) throw ShapeError("cost matrix must be 2-D");
  const std::size_t rows = cost.dim(0), cols = cost.dim(1);
  if (rows > cols) {
    throw ContractError(std::to_string(rows) + " targets cannot be matched to " +
                        std::to_string(cols) + " queries");
  }
  Assignment out;
  out.target_for_query.assign(cols, -1);
  out.query_for_target.assign(rows, 0);
  if (rows == 0) return out;
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw DomainError("matching cost must be finite");
  }
  // Shortest augmenting path with row/column potentials (1-based indices,
  // column 0 is the virtual source).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t r = 1; r <= rows; ++r) {
    match[0] = r;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= cols; ++j) {
    if (match[j] == 0) continue;
    out.query_for_target[match[j] - 1] = j - 1;
    out.target_for_query[j - 1] = static_cast<int>(match[j] - 1);
  }
  for (std::size_t r = 0; r < rows; ++r) out.cost += cost.at(r, out.query_for_target[r]);
  return out;
}

Assignment MatchMasks(const MaskSet& set, const std::vector<Segment>& targets,
                      const std::vector<bool>& valid) {
  if (targets.size() > set.num_queries()) {
    throw ContractError(std::to_string(targets.size()) + " regions exceed " +
                        std::to_string(set.num_queries()) + " queries");
  }
  return Hungarian(MatchingCost(set, targets, valid));
}

DenseLossVars DenseLossOnTape(Tape& tape, const DenseModel& model,
                              const DenseForward& fwd,
                              const std::vector<Segment>& targets,
                              const Assignment& assignment,
                              const std::vector<bool>& valid) {
  const std::size_t n = fwd.logits.shape()[0];
  const std::size_t k = model.num_inlier();
  const net::HeadLayout layout = model.head.layout();
  std::vector<std::size_t> columns(n, model.head.no_object_column());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    columns[assignment.query_for_target[t]] = ColumnForLabel(layout, k, targets[t].label);
  }
  DenseLossVars out;
  out.class_term = MaskedCrossEntropy(tape, fwd.logits, columns, {});
  out.mask_term = MaskTerm(tape, fwd.mask_logits, targets, assignment, valid);
  out.total = grad::Add(out.class_term, out.mask_term);
  return out;
}

DenseLoss EvaluateDenseLoss(const DenseModel& model, const synth::DenseScene& scene) {
  CheckLabels(scene, model.head);
  Tape tape;
  const DenseForward fwd = model.Forward(tape, scene.PixelRows());
  const MaskSet set = MaskSetFromForward(model, fwd, scene.height(), scene.width());
  const std::vector<Segment> targets = SemanticTargets(scene);
  const std::vector<bool> valid = ValidPixels(scene);
  const Assignment a = MatchMasks(set, targets, valid);
  const DenseLossVars l = DenseLossOnTape(tape, model, fwd, targets, a, valid);
  return {l.class_term.value().item(), l.mask_term.value().item(), l.total.value().item()};
}

void DenseTrainConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid dense config: ") + what);
  };
  require(lr > 0 && backbone_lr > 0 && head_lr > 0, "learning rates must be positive");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  require(weight_decay >= 0, "weight_decay must be non-negative");
  require(log_every > 0, "log_every must be positive");
  require(model.num_queries > 0, "num_queries must be positive");
  require(model.query_init_sd > 0, "query_init_sd must be positive");
}

Json ToJson(const DenseTrainConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["closed_steps"] = c.closed_steps;
  j["finetune_steps"] = c.finetune_steps;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["backbone_lr"] = c.backbone_lr;
  j["head_lr"] = c.head_lr;
  j["log_every"] = c.log_every;
  j["pixel_hidden"] = c.model.pixel_hidden;
  j["embed_dim"] = c.model.embed_dim;
  j["num_queries"] = c.model.num_queries;
  j["mask_hidden"] = c.model.mask_hidden;
  j["feature_dim"] = c.model.feature_dim;
  j["query_init_sd"] = c.model.query_init_sd;
  return j;
}

DenseTrainConfig DenseTrainConfigFromJson(const Json& j, DenseTrainConfig c) {
  if (!j.is_object()) throw ConfigError("dense config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") ReadKey(v, key, c.seed);
    else if (key == "closed_steps") ReadKey(v, key, c.closed_steps);
    else if (key == "finetune_steps") ReadKey(v, key, c.finetune_steps);
    else if (key == "lr") ReadKey(v, key, c.lr);
    else if (key == "momentum") ReadKey(v, key, c.momentum);
    else if (key == "weight_decay") ReadKey(v, key, c.weight_decay);
    else if (key == "backbone_lr") ReadKey(v, key, c.backbone_lr);
    else if (key == "head_lr") ReadKey(v, key, c.head_lr);
    else if (key == "log_every") ReadKey(v, key, c.log_every);
    else if (key == "pixel_hidden") ReadKey(v, key, c.model.pixel_hidden);
    else if (key == "embed_dim") ReadKey(v, key, c.model.embed_dim);
    else if (key == "num_queries") ReadKey(v, key, c.model.num_queries);
    else if (key == "mask_hidden") ReadKey(v, key, c.model.mask_hidden);
    else if (key == "feature_dim") ReadKey(v, key, c.model.feature_dim);
    else if (key == "query_init_sd") ReadKey(v, key, c.model.query_init_sd);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.Validate();
  return c;
}

std::string DenseTrainLog::Csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,phase,class_term,mask_term,total,pixel_accuracy\n";
  for (const DenseLogRow& r : rows) {
    os << r.step << "," << r.phase << "," << r.loss.class_term << ","
       << r.loss.mask_term << "," << r.loss.total << "," << r.pixel_accuracy << "\n";
  }
  return os.str();
}

namespace {

struct StepOutcome {
  DenseLoss loss;
  double pixel_accuracy = 0.0;
};

StepOutcome TrainStepImpl(DenseModel& model, const synth::DenseScene& scene,
                          grad::SgdMomentum& opt, const Groups& groups) {
  CheckLabels(scene, model.head);
  Tape tape;
  const DenseForward fwd = model.Forward(tape, scene.PixelRows());
  const MaskSet set = MaskSetFromForward(model, fwd, scene.height(), scene.width());
  const std::vector<Segment> targets = SemanticTargets(scene);
  const std::vector<bool> valid = ValidPixels(scene);
  const Assignment a = MatchMasks(set, targets, valid);
  const DenseLossVars l = DenseLossOnTape(tape, model, fwd, targets, a, valid);
  StepOutcome out;
  out.loss = {l.class_term.value().item(), l.mask_term.value().item(),
              l.total.value().item()};
  out.pixel_accuracy = InlierPixelAccuracy(SemanticSegment(set), scene.labels, set.k);
  const grad::GradientMap grads = tape.Backward(l.total);
  for (const auto& [params, lr] : groups) opt.Step(params, grads, lr);
  return out;
}

bool ShouldLog(std::size_t step, std::size_t total, std::size_t every) {
  return step % every == 0 || step + 1 == total;
}

DenseModelConfig ModelConfigFor(const synth::DenseBundle& bundle,
                                const DenseTrainConfig& cfg) {
  DenseModelConfig m = cfg.model;
  m.in_dim = bundle.spec.feature_dim;
  return m;
}

}  // namespace

DenseLoss DenseTrainStep(DenseModel& model, const synth::DenseScene& scene,
                         grad::SgdMomentum& opt, const Groups& groups) {
  return TrainStepImpl(model, scene, opt, groups).loss;
}

DenseModel TrainDenseClosed(const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg, DenseTrainLog* log) {
  cfg.Validate();
  const Rng root(cfg.seed);
  Rng init = root.Substream("dense.init");
  DenseModel model(ModelConfigFor(bundle, cfg), bundle.spec.k, init);
  SceneOrder order(bundle.train.size(), root.Substream("dense.closed.order"));
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  const Groups groups = {{model.parameters(), cfg.lr}};
  for (std::size_t step = 0; step < cfg.closed_steps; ++step) {
    const StepOutcome o = TrainStepImpl(model, bundle.train[order.Next()], opt, groups);
    if (log && ShouldLog(step, cfg.closed_steps, cfg.log_every)) {
      log->rows.push_back({step, "closed", o.loss, o.pixel_accuracy});
    }
  }
  return model;
}

DenseModel FinetuneDenseUno(const DenseModel& closed, const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg, DenseTrainLog* log) {
  cfg.Validate();
  if (closed.head.layout() != net::HeadLayout::kDenseClosed) {
    throw ConfigError("dense fine-tuning starts from a dense-closed head");
  }
  DenseModel model = closed;
  model.head = net::ExtendHead(closed.head);
  const Rng root(cfg.seed);
  SceneOrder order(bundle.train.size(), root.Substream("dense.finetune.order"));
  Rng paste = root.Substream("dense.finetune.paste");
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  const Groups groups = {{model.backbone_parameters(), cfg.backbone_lr},
                         {model.head.parameters(), cfg.head_lr}};
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    synth::DenseScene scene = bundle.train[order.Next()];
    synth::PasteRandomPatches(scene, bundle.spec, bundle.seen_pool, paste);
    const StepOutcome o = TrainStepImpl(model, scene, opt, groups);
    if (log && ShouldLog(step, cfg.finetune_steps, cfg.log_every)) {
      log->rows.push_back({step, "finetune", o.loss, o.pixel_accuracy});
    }
  }
  return model;
}

DenseTrainResult TrainDense(const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg) {
  DenseTrainLog log;
  const DenseModel closed = TrainDenseClosed(bundle, cfg, &log);
  DenseModel model = FinetuneDenseUno(closed, bundle, cfg, &log);
  return DenseTrainResult{std::move(model), std::move(log)};
}

score::DenseScoreMaps DenseScores(const DenseModel& model,
                                  const synth::DenseScene& scene,
                                  score::NoObjectPolicy policy) {
  if (model.head.layout() != net::HeadLayout::kDense) {
    throw ConfigError("dense scores need a K+2 head (negative and no-object)");
  }
  const MaskSet set = PredictMasks(model, scene);
  std::vector<score::ScoreTriple> per_mask;
  for (std::size_t i = 0; i < set.num_queries(); ++i) {
    const auto row = set.logits.data().subspan(i * set.logits.dim(1), set.logits.dim(1));
    per_mask.push_back(score::ScoresFromLogits(row, set.k, policy));
  }
  return score::AggregateMaskScores(set.masks, per_mask);
}

namespace {

template <typename Predict>
DenseEvaluation EvaluateScenes(const std::vector<synth::DenseScene>& scenes,
                               std::size_t k, Predict predict) {
  if (scenes.empty()) throw ConfigError("no scenes to evaluate");
  std::vector<int> pred_all, gt_all;
  std::vector<double> pos_uno, neg_uno, pos_unc, neg_unc, pos_no, neg_no;
  for (const synth::DenseScene& scene : scenes) {
    const auto [seg, maps] = predict(scene);
    pred_all.insert(pred_all.end(), seg.begin(), seg.end());
    gt_all.insert(gt_all.end(), scene.labels.begin(), scene.labels.end());
    for (std::size_t p = 0; p < scene.num_pixels(); ++p) {
      const int y = scene.labels[p];
      if (y == metrics::kVoidLabel) continue;
      const bool outlier = y == static_cast<int>(k) + 1;
      (outlier ? pos_uno : neg_uno).push_back(maps.s_uno[p]);
      (outlier ? pos_unc : neg_unc).push_back(maps.s_unc[p]);
      (outlier ? pos_no : neg_no).push_back(maps.s_no[p]);
    }
  }
  DenseEvaluation e;
  e.pixel_accuracy = metrics::InlierAccuracy(pred_all, gt_all, static_cast<int>(k));
  e.miou = metrics::MeanIou(pred_all, gt_all, static_cast<int>(k));
  e.n_outlier_pixels = pos_uno.size();
  e.n_inlier_pixels = neg_uno.size();
  const auto uno = metrics::MakeScoredSet(pos_uno, neg_uno);
  e.ap_uno = metrics::AveragePrecision(uno);
  e.auroc_uno = metrics::Auroc(uno);
  e.fpr95_uno = metrics::FprAtTpr(uno, 0.95);
  e.ap_unc = metrics::AveragePrecision(metrics::MakeScoredSet(pos_unc, neg_unc));
  e.ap_no = metrics::AveragePrecision(metrics::MakeScoredSet(pos_no, neg_no));
  return e;
}

}  // namespace

DenseEvaluation EvaluateDense(const DenseModel& model,
                              const std::vector<synth::DenseScene>& scenes) {
  return EvaluateScenes(scenes, model.num_inlier(), [&](const synth::DenseScene& s) {
    return std::make_pair(SemanticSegment(PredictMasks(model, s)), DenseScores(model, s));
  });
}

void SaveDenseModel(const std::filesystem::path& dir, const DenseModel& model) {
  TensorArchive archive;
  archive.format = "uno.dense_model";
  archive.meta["config"] = ToJson(model.config());
  archive.meta["num_inlier"] = model.num_inlier();
  archive.meta["num_classes"] = model.head.num_classes();
  archive.meta["layout"] = net::HeadLayoutName(model.head.layout());
  archive.meta["labels"] = "1-based: 1..K inlier, K+1 negative, K+2 no-object";
  StoreParameters(archive, model.parameters());
  SaveArchive(dir, archive);
}

DenseModel LoadDenseModel(const std::filesystem::path& dir) {
  const TensorArchive archive = LoadArchive(dir, "uno.dense_model");
  const Json& m = archive.meta;
  const Json& c = RequireKey(m, "config");
  DenseModelConfig cfg;
  cfg.in_dim = RequireSize(c, "in_dim");
  cfg.pixel_hidden = RequireSize(c, "pixel_hidden");
  cfg.embed_dim = RequireSize(c, "embed_dim");
  cfg.num_queries = RequireSize(c, "num_queries");
  cfg.mask_hidden = RequireSize(c, "mask_hidden");
  cfg.feature_dim = RequireSize(c, "feature_dim");
  cfg.query_init_sd = RequireDouble(c, "query_init_sd");
  const std::size_t k = RequireSize(m, "num_inlier");
  net::HeadLayout layout;
  try {
    layout = net::ParseHeadLayout(RequireString(m, "layout"));
  } catch (const ConfigError& e) {
    throw MalformedManifestError(e.what());
  }
  if (layout != net::HeadLayout::kDense && layout != net::HeadLayout::kDenseClosed) {
    throw MalformedManifestError("dense models carry a dense or dense-closed head");
  }
  if (net::NumClasses(layout, k) != RequireSize(m, "num_classes")) {
    throw MalformedManifestError("num_classes disagrees with layout");
  }
  Rng unused(0);
  DenseModel model(cfg, k, unused);
  if (layout == net::HeadLayout::kDense) model.head = net::ExtendHead(model.head);
  RestoreParameters(archive, model.parameters());
  return model;
}

// ------------------------------------------------------------- OOD head --

DenseOodModel AttachOodHead(const DenseModel& closed, Rng& rng) {
  if (closed.head.layout() != net::HeadLayout::kDenseClosed) {
    throw ConfigError("the OOD head attaches to a dense-closed model");
  }
  return DenseOodModel{closed, net::ClassifierHead(closed.config().feature_dim, 3,
                                                   net::HeadLayout::kClosed, rng, "ood")};
}

DenseOodModel FinetuneDenseOodHead(const DenseModel& closed,
                                   const synth::DenseBundle& bundle,
                                   const DenseTrainConfig& cfg, DenseTrainLog* log) {
  cfg.Validate();
  const Rng root(cfg.seed);
  Rng init = root.Substream("dense.ood.init");
  DenseOodModel model = AttachOodHead(closed, init);
  SceneOrder order(bundle.train.size(), root.Substream("dense.finetune.order"));
  Rng paste = root.Substream("dense.finetune.paste");
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  const std::size_t k = closed.num_inlier();
  const int negative = static_cast<int>(k) + 1;
  const Groups groups = {{model.base.backbone_parameters(), cfg.backbone_lr},
                         {model.base.head.parameters(), cfg.head_lr},
                         {model.ood.parameters(), cfg.head_lr}};
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    synth::DenseScene scene = bundle.train[order.Next()];
    synth::PasteRandomPatches(scene, bundle.spec, bundle.seen_pool, paste);
    Tape tape;
    const DenseForward fwd = model.base.Forward(tape, scene.PixelRows());
    const Var ood_logits = model.ood.Forward(tape, fwd.prelogits);
    const std::vector<Segment> targets = SemanticTargets(scene);
    const std::vector<bool> valid = ValidPixels(scene);
    const std::size_t n = fwd.logits.shape()[0];

    Tensor lp(Shape{targets.size(), n});
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> cls = LogSoftmaxRow(fwd.logits.value(), i);
      const std::vector<double> ood = LogSoftmaxRow(ood_logits.value(), i);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        lp.at(t, i) = targets[t].label == negative
                          ? ood[kOodOutlier]
                          : cls[ColumnForLabel(net::HeadLayout::kDenseClosed, k,
                                               targets[t].label)];
      }
    }
    if (targets.size() > n) throw ContractError("more regions than queries");
    const Assignment a = Hungarian(
        MatchingCostFromLogProbs(lp, fwd.mask_logits.value(), targets, valid));

    std::vector<std::size_t> cls_col(n, model.base.head.no_object_column());
    std::vector<bool> cls_rows(n, true);
    std::vector<std::size_t> ood_col(n, kOodNoObject);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const std::size_t q = a.query_for_target[t];
      if (targets[t].label == negative) {
        cls_rows[q] = false;
        ood_col[q] = kOodOutlier;
      } else {
        cls_col[q] = ColumnForLabel(net::HeadLayout::kDenseClosed, k, targets[t].label);
        ood_col[q] = kOodInlier;
      }
    }
    const Var cls_term = MaskedCrossEntropy(tape, fwd.logits, cls_col, cls_rows);
    const Var ood_term = MaskedCrossEntropy(tape, ood_logits, ood_col, {});
    const Var class_term = grad::Add(cls_term, ood_term);
    const Var mask_term = MaskTerm(tape, fwd.mask_logits, targets, a, valid);
    const Var total = grad::Add(class_term, mask_term);
    const DenseLoss l{class_term.value().item(), mask_term.value().item(),
                      total.value().item()};
    const MaskSet set = MaskSetFromForward(model.base, fwd, scene.height(), scene.width());
    const double acc = InlierPixelAccuracy(SemanticSegment(set), scene.labels, k);
    const grad::GradientMap grads = tape.Backward(total);
    for (const auto& [params, lr] : groups) opt.Step(params, grads, lr);
    if (log && ShouldLog(step, cfg.finetune_steps, cfg.log_every)) {
      log->rows.push_back({step, "ood-head", l, acc});
    }
  }
  return model;
}

score::DenseScoreMaps OodHeadScores(const DenseOodModel& model,
                                    const synth::DenseScene& scene) {
  const MaskSet set = PredictMasks(model.base, scene);
  const Tensor ood = net::Softmax(model.ood.Logits(set.prelogits));
  std::vector<score::ScoreTriple> per_mask;
  for (std::size_t i = 0; i < set.num_queries(); ++i) {
    score::ScoreTriple t;
    t.s_no = ood.at(i, kOodOutlier);
    double best = 0.0;
    for (std::size_t c = 0; c < set.k; ++c) best = std::max(best, set.posteriors.at(i, c));
    t.s_unc = -best;
    t.s_uno = t.s_unc + t.s_no;
    per_mask.push_back(t);
  }
  return score::AggregateMaskScores(set.masks, per_mask);
}

DenseEvaluation EvaluateDenseOod(const DenseOodModel& model,
                                 const std::vector<synth::DenseScene>& scenes) {
  return EvaluateScenes(scenes, model.base.num_inlier(), [&](const synth::DenseScene& s) {
    return std::make_pair(SemanticSegment(PredictMasks(model.base, s)),
                          OodHeadScores(model, s));
  });
}

BinaryOodModel FinetuneBinaryOod(const net::OpenSetModel& pretrained,
                                 const train::MixedDataset& data,
                                 const train::TrainConfig& cfg) {
  cfg.Validate();
  data.Validate();
  if (pretrained.head.layout() != net::HeadLayout::kClosed) {
    throw ConfigError("the binary OOD head attaches to a K-way classifier");
  }
  if (data.negative_x.dim(0) == 0) throw ConfigError("binary OOD head needs negatives");
  const Rng root(cfg.seed);
  Rng init = root.Substream("ood.init");
  BinaryOodModel model{pretrained,
                       net::ClassifierHead(pretrained.features.feature_dim(), 2,
                                           net::HeadLayout::kClosed, init, "ood")};
  const std::size_t k = data.k;
  const std::size_t per_class =
      train::PerClassCount(cfg.batch_size, k + 1, cfg.remainder);
  const std::size_t n_neg = cfg.negatives_per_batch.value_or(per_class);
  train::BalancedSampler inliers(data.inlier_y, std::vector<std::size_t>(k, per_class),
                                 root.Substream("ood.inliers"));
  train::BalancedSampler negatives(std::vector<int>(data.negative_x.dim(0), 1),
                                   {n_neg}, root.Substream("ood.negatives"));
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    const auto idx = inliers.Next();
    const Tensor x_in = train::Gather(data.inlier_x, idx);
    const std::vector<int> y_in = train::Gather(data.inlier_y, idx);
    const Tensor x_neg = train::Gather(data.negative_x, negatives.Next());
    std::vector<int> y_ood(idx.size(), 1);
    y_ood.insert(y_ood.end(), n_neg, 2);
    Tape tape;
    const Var z_in = model.closed.features.Forward(tape, tape.Constant(x_in));
    const Var z_neg = model.closed.features.Forward(tape, tape.Constant(x_neg));
    const Var l_cls = train::CrossEntropy(tape, model.closed.head.Forward(tape, z_in), y_in);
    const Var z_all = grad::Transpose(
        grad::Concat({grad::Transpose(z_in), grad::Transpose(z_neg)}));
    const Var l_ood = train::CrossEntropy(tape, model.ood.Forward(tape, z_all), y_ood);
    const grad::GradientMap grads = tape.Backward(grad::Add(l_cls, l_ood));
    const double blr = train::ScheduledLr(cfg.backbone_lr, step, cfg);
    const double hlr = train::ScheduledLr(cfg.head_lr, step, cfg);
    opt.Step(model.closed.features.parameters(), grads, blr);
    opt.Step(model.closed.head.parameters(), grads, hlr);
    opt.Step(model.ood.parameters(), grads, hlr);
  }
  return model;
}

std::vector<score::ScoreTriple> BinaryOodScores(const BinaryOodModel& model,
                                                const Tensor& x) {
  const Tensor z = model.closed.features.Features(x);
  const Tensor p = net::Softmax(model.closed.head.Logits(z));
  const Tensor q = net::Softmax(model.ood.Logits(z));
  std::vector<score::ScoreTriple> out(z.dim(0));
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    double best = 0.0;
    for (std::size_t c = 0; c < p.dim(1); ++c) best = std::max(best, p.at(r, c));
    out[r].s_no = q.at(r, 1);
    out[r].s_unc = -best;
    out[r].s_uno = out[r].s_unc + out[r].s_no;
  }
  return out;
}

}  // namespace uno::seg
