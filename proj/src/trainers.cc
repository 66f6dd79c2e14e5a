// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/trainers.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uno/errors.h"

namespace uno::train {

using grad::Parameter;
using grad::Tape;
using grad::Var;

std::string_view RemainderRuleName(RemainderRule r) {
  return r == RemainderRule::kError ? "error" : "truncate";
}

RemainderRule ParseRemainderRule(std::string_view name) {
  if (name == "error") return RemainderRule::kError;
  if (name == "truncate") return RemainderRule::kTruncate;
  throw ConfigError("unknown remainder rule '" + std::string(name) +
                    "' (expected error or truncate)");
}

std::string_view FlowOptimizerName(FlowOptimizer o) {
  return o == FlowOptimizer::kSgd ? "sgd" : "adam";
}

FlowOptimizer ParseFlowOptimizer(std::string_view name) {
  if (name == "sgd") return FlowOptimizer::kSgd;
  if (name == "adam") return FlowOptimizer::kAdam;
  throw ConfigError("unknown flow optimizer '" + std::string(name) +
                    "' (expected sgd or adam)");
}

void TrainConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid train config: ") + what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(lr > 0 && flow_lr > 0 && backbone_lr > 0 && head_lr > 0,
          "learning rates must be positive");
  require(momentum >= 0 && momentum < 1 && flow_momentum >= 0 &&
              flow_momentum < 1,
          "momentum must lie in [0, 1)");
  require(weight_decay >= 0, "weight_decay must be non-negative");
  require(beta >= 0, "beta must be non-negative");
  require(decay_factor > 0, "decay_factor must be positive");
  require(flow_batch > 0, "flow_batch must be positive");
  require(flow_clip_norm >= 0, "flow_clip_norm must be non-negative");
  require(log_every > 0, "log_every must be positive");
}

namespace {

template <typename T>
void ReadKey(const Json& v, const std::string& key, T& out) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    out = v.get<double>();
  } else {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    out = v.get<T>();
  }
}

}  // namespace

Json ToJson(const TrainConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["decay_after"] = c.decay_after;
  j["decay_factor"] = c.decay_factor;
  j["beta"] = c.beta;
  j["flow_optimizer"] = FlowOptimizerName(c.flow_optimizer);
  j["flow_lr"] = c.flow_lr;
  j["flow_momentum"] = c.flow_momentum;
  j["flow_batch"] = c.flow_batch;
  j["flow_pretrain_steps"] = c.flow_pretrain_steps;
  j["flow_clip_norm"] = c.flow_clip_norm;
  j["finetune_steps"] = c.finetune_steps;
  j["backbone_lr"] = c.backbone_lr;
  j["head_lr"] = c.head_lr;
  j["remainder"] = RemainderRuleName(c.remainder);
  j["negatives_per_batch"] =
      c.negatives_per_batch ? Json(*c.negatives_per_batch) : Json(nullptr);
  j["log_every"] = c.log_every;
  return j;
}

TrainConfig TrainConfigFromJson(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") ReadKey(v, key, c.seed);
    else if (key == "steps") ReadKey(v, key, c.steps);
    else if (key == "batch_size") ReadKey(v, key, c.batch_size);
    else if (key == "lr") ReadKey(v, key, c.lr);
    else if (key == "momentum") ReadKey(v, key, c.momentum);
    else if (key == "weight_decay") ReadKey(v, key, c.weight_decay);
    else if (key == "decay_after") ReadKey(v, key, c.decay_after);
    else if (key == "decay_factor") ReadKey(v, key, c.decay_factor);
    else if (key == "beta") ReadKey(v, key, c.beta);
    else if (key == "flow_lr") ReadKey(v, key, c.flow_lr);
    else if (key == "flow_momentum") ReadKey(v, key, c.flow_momentum);
    else if (key == "flow_batch") ReadKey(v, key, c.flow_batch);
    else if (key == "flow_pretrain_steps") ReadKey(v, key, c.flow_pretrain_steps);
    else if (key == "flow_clip_norm") ReadKey(v, key, c.flow_clip_norm);
    else if (key == "finetune_steps") ReadKey(v, key, c.finetune_steps);
    else if (key == "backbone_lr") ReadKey(v, key, c.backbone_lr);
    else if (key == "head_lr") ReadKey(v, key, c.head_lr);
    else if (key == "log_every") ReadKey(v, key, c.log_every);
    else if (key == "flow_optimizer") {
      if (!v.is_string()) throw ConfigError("config key 'flow_optimizer' must be a string");
      c.flow_optimizer = ParseFlowOptimizer(v.get<std::string>());
    } else if (key == "remainder") {
      if (!v.is_string()) throw ConfigError("config key 'remainder' must be a string");
      c.remainder = ParseRemainderRule(v.get<std::string>());
    } else if (key == "negatives_per_batch") {
      if (v.is_null()) {
        c.negatives_per_batch.reset();
      } else {
        std::size_t n = 0;
        ReadKey(v, key, n);
        c.negatives_per_batch = n;
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.Validate();
  return c;
}

std::string TrainLog::Csv() const {
  const bool collapse = std::any_of(rows.begin(), rows.end(), [](const LogRow& r) {
    return r.collapse_fraction.has_value();
  });
  std::ostringstream os;
  os.precision(17);
  os << "step,phase,l_cls,l_mle,l_jsd,l_flow,accuracy";
  if (collapse) os << ",collapse_fraction";
  os << "\n";
  for (const LogRow& r : rows) {
    os << r.step << "," << r.phase << "," << r.loss.l_cls << "," << r.loss.l_mle
       << "," << r.loss.l_jsd << "," << r.loss.l_flow << "," << r.accuracy;
    if (collapse) {
      os << ",";
      if (r.collapse_fraction) os << *r.collapse_fraction;
    }
    os << "\n";
  }
  return os.str();
}

void MixedDataset::Validate() const {
  if (k == 0) throw ConfigError("dataset needs at least one inlier class");
  if (inlier_x.rank() != 2 || inlier_x.dim(0) != inlier_y.size()) {
    throw ShapeError("inlier features and labels disagree in length");
  }
  for (int y : inlier_y) {
    if (y < 1 || y > static_cast<int>(k)) {
      throw ContractError("inlier label " + std::to_string(y) +
                          " outside 1.." + std::to_string(k));
    }
  }
  for (std::size_t c = 1; c <= k; ++c) {
    if (std::find(inlier_y.begin(), inlier_y.end(), static_cast<int>(c)) ==
        inlier_y.end()) {
      throw ConfigError("inlier class " + std::to_string(c) + " is empty");
    }
  }
  if (negative_x.rank() != 2 ||
      (negative_x.dim(0) > 0 && negative_x.dim(1) != inlier_x.dim(1))) {
    throw ShapeError("negatives must be [n, " + std::to_string(inlier_x.dim(1)) + "]");
  }
}

MixedDataset MixedDataset::FromBundle(const synth::DatasetBundle& b) {
  MixedDataset d{b.spec.k, b.train.x, b.train.y, b.negatives.x};
  d.Validate();
  return d;
}

std::size_t PerClassCount(std::size_t batch_size, std::size_t num_classes,
                          RemainderRule rule) {
  if (num_classes == 0) throw ConfigError("no classes to balance");
  if (batch_size % num_classes != 0 && rule == RemainderRule::kError) {
    throw ConfigError("batch_size " + std::to_string(batch_size) +
                      " is not divisible by " + std::to_string(num_classes) +
                      " classes");
  }
  const std::size_t n = batch_size / num_classes;
  if (n == 0) throw ConfigError("batch_size smaller than the number of classes");
  return n;
}

BalancedSampler::BalancedSampler(const std::vector<int>& labels,
                                 const std::vector<std::size_t>& counts, Rng rng)
    : pools_(counts.size()), cursor_(counts.size(), 0), counts_(counts), rng_(rng) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 1 || y > static_cast<int>(counts.size())) {
      throw ContractError("label " + std::to_string(y) + " outside 1.." +
                          std::to_string(counts.size()));
    }
    pools_[y - 1].push_back(i);
  }
  for (std::size_t c = 0; c < pools_.size(); ++c) {
    if (counts_[c] > 0 && pools_[c].empty()) {
      throw ConfigError("class " + std::to_string(c + 1) + " has no samples");
    }
    cursor_[c] = pools_[c].size();  // forces a shuffle on first use
  }
}

std::vector<std::size_t> BalancedSampler::Next() {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < pools_.size(); ++c) {
    auto& pool = pools_[c];
    for (std::size_t i = 0; i < counts_[c]; ++i) {
      if (cursor_[c] == pool.size()) {
        for (std::size_t j = pool.size(); j > 1; --j) {
          std::swap(pool[j - 1], pool[rng_.UniformInt(j)]);
        }
        cursor_[c] = 0;
      }
      out.push_back(pool[cursor_[c]++]);
    }
  }
  return out;
}

Tensor Gather(const Tensor& x, const std::vector<std::size_t>& idx) {
  const std::size_t d = x.dim(1);
  Tensor out(Shape{idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(x.data().begin() + idx[i] * d, d, out.data().begin() + i * d);
  }
  return out;
}

std::vector<int> Gather(const std::vector<int>& y,
                        const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
  return out;
}

Tensor ConcatRows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("cannot stack " + ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  }
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor(Shape{a.dim(0) + b.dim(0), a.dim(1)}, std::move(data));
}

namespace {

Tensor OneHot(const std::vector<int>& labels, std::size_t c) {
  Tensor t(Shape{labels.size(), c});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > static_cast<int>(c)) {
      throw ContractError("label " + std::to_string(labels[i]) +
                          " outside 1.." + std::to_string(c));
    }
    t.at(i, labels[i] - 1) = 1.0;
  }
  return t;
}

}  // namespace

Var CrossEntropy(Tape& tape, Var logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size() || s[0] == 0) {
    throw ShapeError("cross-entropy needs [batch, C] logits matching the labels");
  }
  const Var onehot = tape.Constant(OneHot(labels, s[1]));
  const Var picked = grad::Sum(grad::Mul(grad::LogSoftmax(logits), onehot));
  return grad::Scale(picked, -1.0 / static_cast<double>(s[0]));
}

double CrossEntropy(const Tensor& logits, const std::vector<int>& labels) {
  Tape tape;
  return CrossEntropy(tape, tape.Constant(logits), labels).value().item();
}

Var JsdUniform(Var logits) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] == 0 || s[0] == 0) {
    throw ShapeError("JSD needs [batch, K] logits");
  }
  const double k = static_cast<double>(s[1]);
  const Var logp = grad::LogSoftmax(logits);
  const Var p = grad::Exp(logp);
  const Var logm = grad::Log(grad::AddScalar(grad::Scale(p, 0.5), 0.5 / k));
  // KL(U || M) = -log K - (1/K) sum_j log m_j
  const Var kl_u = grad::AddScalar(grad::Scale(grad::SumLastAxis(logm), -1.0 / k),
                                   -std::log(k));
  const Var kl_p = grad::SumLastAxis(grad::Mul(p, grad::Sub(logp, logm)));
  return grad::Scale(grad::Mean(grad::Add(kl_u, kl_p)), 0.5);
}

double JsdUniform(std::span<const double> p) {
  if (p.empty()) throw DomainError("JSD of an empty distribution");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("JSD input is not a probability vector");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("JSD input does not sum to 1");
  }
  const double u = 1.0 / static_cast<double>(p.size());
  double kl_u = 0.0, kl_p = 0.0;
  for (double v : p) {
    const double m = 0.5 * (v + u);
    kl_u += u * std::log(u / m);
    if (v > 0.0) kl_p += v * std::log(v / m);
  }
  return 0.5 * (kl_u + kl_p);
}

double BatchAccuracy(const Tensor& logits, const std::vector<int>& y,
                     std::size_t limit) {
  if (y.empty()) return 0.0;
  const std::vector<int> pred = net::ArgmaxLabels(logits, limit);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

double ScheduledLr(double base, std::size_t step, const TrainConfig& cfg) {
  if (cfg.decay_after > 0 && step >= cfg.decay_after) return base * cfg.decay_factor;
  return base;
}

namespace {

// Shuffled epochs over all rows, batch_size rows per call (the last batch of
// an epoch wraps into a fresh permutation).
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::size_t batch, Rng rng)
      : order_(n), batch_(batch), cursor_(n), rng_(rng) {
    if (n == 0) throw ConfigError("cannot sample from an empty dataset");
    std::iota(order_.begin(), order_.end(), 0);
  }
  std::vector<std::size_t> Next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (cursor_ == order_.size()) {
        for (std::size_t j = order_.size(); j > 1; --j) {
          std::swap(order_[j - 1], order_[rng_.UniformInt(j)]);
        }
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_;
  Rng rng_;
};

bool ShouldLog(std::size_t step, std::size_t total, const TrainConfig& cfg) {
  return step % cfg.log_every == 0 || step + 1 == total;
}

std::vector<int> Repeat(int label, std::size_t n) { return std::vector<int>(n, label); }

std::vector<int> Concat(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Inlier accuracy over the first `n_in` rows, argmax over the first K logits.
double InlierAccuracy(const Tensor& logits, const std::vector<int>& y,
                      std::size_t n_in, std::size_t k) {
  if (n_in == 0) return 0.0;
  std::vector<std::size_t> idx(n_in);
  std::iota(idx.begin(), idx.end(), 0);
  return BatchAccuracy(Gather(logits, idx), Gather(y, idx), k);
}

void StepGroups(net::OpenSetModel& model, grad::SgdMomentum& opt,
                const grad::GradientMap& grads, double backbone_lr,
                double head_lr) {
  const auto backbone = model.features.parameters();
  const auto head = model.head.parameters();
  opt.Step(backbone, grads, backbone_lr);
  opt.Step(head, grads, head_lr);
}

void StepFlow(flow::FlowModel& flow, grad::Optimizer& opt,
              grad::GradientMap& grads, double lr, const TrainConfig& cfg) {
  auto params = flow.parameters();
  if (cfg.flow_clip_norm > 0) grad::ClipGradNorm(grads, params, cfg.flow_clip_norm);
  opt.Step(params, grads, lr);
}

void CheckFlowDim(const net::OpenSetModel& model, const flow::FlowModel& flow) {
  if (model.features.in_dim() != flow.dim()) {
    throw ShapeError("flow dimension " + std::to_string(flow.dim()) +
                     " does not match classifier input " +
                     std::to_string(model.features.in_dim()));
  }
}

}  // namespace

void TrainClosed(net::OpenSetModel& model, const Tensor& x,
                 const std::vector<int>& y, const TrainConfig& cfg,
                 TrainLog* log) {
  cfg.Validate();
  if (model.head.layout() != net::HeadLayout::kClosed) {
    throw ConfigError("closed-set training needs a K-way head");
  }
  const Rng root(cfg.seed);
  EpochSampler sampler(y.size(), cfg.batch_size, root.Substream("closed.batches"));
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  auto params = model.parameters();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto idx = sampler.Next();
    const Tensor bx = Gather(x, idx);
    const std::vector<int> by = Gather(y, idx);
    Tape tape;
    const Var logits = model.Logits(tape, tape.Constant(bx));
    const Var loss = CrossEntropy(tape, logits, by);
    const double acc = BatchAccuracy(logits.value(), by);
    const double l = loss.value().item();
    opt.Step(params, tape.Backward(loss), ScheduledLr(cfg.lr, step, cfg));
    if (log && ShouldLog(step, cfg.steps, cfg)) {
      log->rows.push_back({step, "closed", {l, 0, 0, 0}, acc, std::nullopt});
    }
  }
}

net::OpenSetModel FinetuneReal(const net::OpenSetModel& pretrained,
                               const MixedDataset& data, const TrainConfig& cfg,
                               TrainLog* log) {
  cfg.Validate();
  data.Validate();
  if (data.negative_x.dim(0) == 0) {
    throw ConfigError("fine-tuning with real negatives needs a non-empty negative set");
  }
  if (pretrained.head.num_inlier() != data.k) {
    throw ConfigError("model and dataset disagree on K");
  }
  net::OpenSetModel model{pretrained.features, net::ExtendHead(pretrained.head)};
  const std::size_t k = data.k;
  const std::size_t per_class = PerClassCount(cfg.batch_size, k + 1, cfg.remainder);
  const std::size_t n_neg = cfg.negatives_per_batch.value_or(per_class);
  const Rng root(cfg.seed);
  BalancedSampler inliers(data.inlier_y, std::vector<std::size_t>(k, per_class),
                          root.Substream("finetune.inliers"));
  std::optional<BalancedSampler> negatives;
  if (n_neg > 0) {
    negatives.emplace(Repeat(1, data.negative_x.dim(0)),
                      std::vector<std::size_t>{n_neg},
                      root.Substream("finetune.negatives"));
  }
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    const auto idx_in = inliers.Next();
    Tensor bx = Gather(data.inlier_x, idx_in);
    std::vector<int> by = Gather(data.inlier_y, idx_in);
    if (negatives) {
      bx = ConcatRows(bx, Gather(data.negative_x, negatives->Next()));
      by = Concat(std::move(by), Repeat(static_cast<int>(k) + 1, n_neg));
    }
    Tape tape;
    const Var logits = model.Logits(tape, tape.Constant(bx));
    const Var loss = CrossEntropy(tape, logits, by);
    const double l = loss.value().item();
    const double acc = InlierAccuracy(logits.value(), by, idx_in.size(), k);
    StepGroups(model, opt, tape.Backward(loss),
               ScheduledLr(cfg.backbone_lr, step, cfg),
               ScheduledLr(cfg.head_lr, step, cfg));
    if (log && ShouldLog(step, cfg.finetune_steps, cfg)) {
      log->rows.push_back({step, "finetune", {l, 0, 0, 0}, acc, std::nullopt});
    }
  }
  return model;
}

std::unique_ptr<grad::Optimizer> MakeFlowOptimizer(const TrainConfig& cfg) {
  if (cfg.flow_optimizer == FlowOptimizer::kSgd) {
    return std::make_unique<grad::SgdMomentum>(cfg.flow_momentum, 0.0);
  }
  return std::make_unique<grad::Adam>();
}

JointState::JointState(const TrainConfig& cfg)
    : classifier(cfg.momentum, cfg.weight_decay), flow(MakeFlowOptimizer(cfg)) {}

LossBreakdown JointStep(net::OpenSetModel& classifier, flow::FlowModel& flow,
                        const Tensor& x, const std::vector<int>& y,
                        const Tensor& noise, const TrainConfig& cfg,
                        JointState& state, std::size_t step, double* accuracy) {
  if (classifier.head.layout() != net::HeadLayout::kClosed) {
    throw ConfigError("the joint step trains a K-way classifier");
  }
  CheckFlowDim(classifier, flow);
  Tape tape;
  const Var xs = tape.Constant(x);
  const Var logits = classifier.Logits(tape, xs);
  const Var l_cls = CrossEntropy(tape, logits, y);
  const Var l_mle = grad::Neg(grad::Mean(flow.LogProb(tape, xs)));
  const Var samples = flow.SampleFromNoise(tape, noise);
  const Var l_jsd = JsdUniform(classifier.Logits(tape, samples));
  const Var l_flow = grad::Add(l_mle, grad::Scale(l_jsd, cfg.beta));
  grad::GradientMap grads = tape.Backward(grad::Add(l_cls, l_flow));

  LossBreakdown out;
  out.l_cls = l_cls.value().item();
  out.l_mle = l_mle.value().item();
  out.l_jsd = l_jsd.value().item();
  out.l_flow = l_flow.value().item();
  if (accuracy) *accuracy = BatchAccuracy(logits.value(), y);
  StepFlow(flow, *state.flow, grads, ScheduledLr(cfg.flow_lr, step, cfg), cfg);
  state.classifier.Step(classifier.parameters(), grads,
                        ScheduledLr(cfg.lr, step, cfg));
  return out;
}

void PretrainFlow(flow::FlowModel& flow, const Tensor& x, const TrainConfig& cfg,
                  TrainLog* log) {
  const Rng root(cfg.seed);
  EpochSampler sampler(x.dim(0), cfg.batch_size, root.Substream("flow.pretrain"));
  auto opt = MakeFlowOptimizer(cfg);
  for (std::size_t step = 0; step < cfg.flow_pretrain_steps; ++step) {
    const Tensor bx = Gather(x, sampler.Next());
    Tape tape;
    const Var l_mle = grad::Neg(grad::Mean(flow.LogProb(tape, tape.Constant(bx))));
    const double l = l_mle.value().item();
    grad::GradientMap grads = tape.Backward(l_mle);
    StepFlow(flow, *opt, grads, cfg.flow_lr, cfg);
    if (log && ShouldLog(step, cfg.flow_pretrain_steps, cfg)) {
      log->rows.push_back({step, "flow-pretrain", {0, l, 0, l}, 0.0, std::nullopt});
    }
  }
}

net::FeatureConfig DefaultFeatures() { return net::FeatureConfig{}; }

net::OpenSetModel FinetuneSynthetic(const net::OpenSetModel& step1,
                                    flow::FlowModel& flow,
                                    const MixedDataset& data,
                                    const TrainConfig& cfg, TrainLog* log) {
  cfg.Validate();
  data.Validate();
  CheckFlowDim(step1, flow);
  flow.Freeze();
  net::OpenSetModel model{step1.features, net::ExtendHead(step1.head)};
  const std::size_t k = data.k;
  const std::size_t per_class = PerClassCount(cfg.batch_size, k + 1, cfg.remainder);
  const std::size_t n_neg = cfg.negatives_per_batch.value_or(per_class);
  const Rng root(cfg.seed);
  BalancedSampler inliers(data.inlier_y, std::vector<std::size_t>(k, per_class),
                          root.Substream("step2.inliers"));
  Rng sample_rng = root.Substream("step2.flow");
  grad::SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    const auto idx_in = inliers.Next();
    const Tensor bx = ConcatRows(Gather(data.inlier_x, idx_in),
                                 flow.Sample(n_neg, sample_rng));
    const std::vector<int> by = Concat(Gather(data.inlier_y, idx_in),
                                       Repeat(static_cast<int>(k) + 1, n_neg));
    Tape tape;
    const Var logits = model.Logits(tape, tape.Constant(bx));
    const Var loss = CrossEntropy(tape, logits, by);
    const double l = loss.value().item();
    const double acc = InlierAccuracy(logits.value(), by, idx_in.size(), k);
    StepGroups(model, opt, tape.Backward(loss),
               ScheduledLr(cfg.backbone_lr, step, cfg),
               ScheduledLr(cfg.head_lr, step, cfg));
    if (log && ShouldLog(step, cfg.finetune_steps, cfg)) {
      log->rows.push_back({step, "step2", {l, 0, 0, 0}, acc, std::nullopt});
    }
  }
  return model;
}

TrainResult TwoStepTrain(const MixedDataset& data, const TrainConfig& cfg,
                         const net::FeatureConfig& features,
                         const flow::FlowConfig& flow_cfg) {
  cfg.Validate();
  data.Validate();
  const Rng root(cfg.seed);
  Rng init = root.Substream("init");
  net::OpenSetModel model =
      net::MakeOpenSetModel(features, data.k, net::HeadLayout::kClosed, init);
  flow::FlowModel flow(flow_cfg, init);
  CheckFlowDim(model, flow);
  TrainLog log;
  PretrainFlow(flow, data.inlier_x, cfg, &log);

  EpochSampler sampler(data.inlier_y.size(), cfg.batch_size,
                       root.Substream("step1.batches"));
  Rng noise_rng = root.Substream("step1.noise");
  JointState state(cfg);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto idx = sampler.Next();
    const Tensor noise = flow.BaseNoise(cfg.flow_batch, noise_rng);
    double acc = 0.0;
    const LossBreakdown l = JointStep(model, flow, Gather(data.inlier_x, idx),
                                      Gather(data.inlier_y, idx), noise, cfg,
                                      state, step, &acc);
    if (ShouldLog(step, cfg.steps, cfg)) {
      log.rows.push_back({step, "step1", l, acc, std::nullopt});
    }
  }
  net::OpenSetModel final_model = FinetuneSynthetic(model, flow, data, cfg, &log);
  return TrainResult{std::move(final_model), std::move(flow), std::move(log)};
}

TrainResult NaiveJointTrain(const MixedDataset& data, const TrainConfig& cfg,
                            const net::FeatureConfig& features,
                            const flow::FlowConfig& flow_cfg) {
  cfg.Validate();
  data.Validate();
  const Rng root(cfg.seed);
  Rng init = root.Substream("init");
  net::OpenSetModel model =
      net::MakeOpenSetModel(features, data.k, net::HeadLayout::kNegative, init);
  flow::FlowModel flow(flow_cfg, init);
  CheckFlowDim(model, flow);
  TrainLog log;
  PretrainFlow(flow, data.inlier_x, cfg, &log);

  const std::size_t k = data.k;
  const std::size_t per_class = PerClassCount(cfg.batch_size, k + 1, cfg.remainder);
  const std::size_t n_neg = cfg.negatives_per_batch.value_or(per_class);
  BalancedSampler inliers(data.inlier_y, std::vector<std::size_t>(k, per_class),
                          root.Substream("naive.inliers"));
  Rng noise_rng = root.Substream("naive.noise");
  const std::vector<int> neg_labels = Repeat(static_cast<int>(k) + 1, n_neg);
  JointState state(cfg);
  // Same total number of classifier updates as both steps of TwoStepTrain.
  const std::size_t total = cfg.steps + cfg.finetune_steps;
  for (std::size_t step = 0; step < total; ++step) {
    const auto idx_in = inliers.Next();
    const Tensor bx = Gather(data.inlier_x, idx_in);
    const std::vector<int> by_in = Gather(data.inlier_y, idx_in);
    const Tensor noise = flow.BaseNoise(n_neg, noise_rng);
    // Flow samples are labeled K+1 and stay on the tape, so the
    // cross-entropy also pulls the flow toward confidently rejected regions.
    Tape tape;
    const Var xs = tape.Constant(bx);
    const Var samples = flow.SampleFromNoise(tape, noise);
    const Var in_logits = model.Logits(tape, xs);
    const Var neg_logits = model.Logits(tape, samples);
    const Var l_cls = grad::Scale(
        grad::Add(grad::Scale(CrossEntropy(tape, in_logits, by_in),
                              static_cast<double>(idx_in.size())),
                  grad::Scale(CrossEntropy(tape, neg_logits, neg_labels),
                              static_cast<double>(n_neg))),
        1.0 / static_cast<double>(idx_in.size() + n_neg));
    const Var l_mle = grad::Neg(grad::Mean(flow.LogProb(tape, xs)));
    const Var l_jsd = JsdUniform(grad::Slice(neg_logits, 0, k));
    const Var l_flow = grad::Add(l_mle, grad::Scale(l_jsd, cfg.beta));
    grad::GradientMap grads = tape.Backward(grad::Add(l_cls, l_flow));

    LossBreakdown l{l_cls.value().item(), l_mle.value().item(),
                    l_jsd.value().item(), l_flow.value().item()};
    const double acc = BatchAccuracy(in_logits.value(), by_in, k);
    const double collapse = CollapseFraction(model, samples.value());
    StepFlow(flow, *state.flow, grads, ScheduledLr(cfg.flow_lr, step, cfg), cfg);
    state.classifier.Step(model.parameters(), grads, ScheduledLr(cfg.lr, step, cfg));
    if (ShouldLog(step, total, cfg)) {
      log.rows.push_back({step, "naive", l, acc, collapse});
    }
  }
  return TrainResult{std::move(model), std::move(flow), std::move(log)};
}

double CollapseFraction(const net::OpenSetModel& model, const Tensor& samples,
                        double threshold) {
  if (samples.dim(0) == 0) return 0.0;
  const std::size_t neg = model.head.negative_column();
  const Tensor p = model.Posterior(samples);
  std::size_t hit = 0;
  for (std::size_t r = 0; r < p.dim(0); ++r) hit += p.at(r, neg) > threshold;
  return static_cast<double>(hit) / static_cast<double>(p.dim(0));
}

double MeanPairwiseDistance(const Tensor& z) {
  if (z.rank() != 2 || z.dim(0) < 2) {
    throw ShapeError("pairwise distances need at least two rows");
  }
  const std::size_t n = z.dim(0), d = z.dim(1);
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = z.at(a, j) - z.at(b, j);
        s += diff * diff;
      }
      sum += std::sqrt(s);
    }
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace uno::train
