// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/model.h"

#include <algorithm>
#include <cmath>

#include "uno/checkpoint.h"
#include "uno/errors.h"

namespace uno::net {

using grad::Parameter;
using grad::Tape;
using grad::Var;

std::string_view HeadLayoutName(HeadLayout layout) {
  switch (layout) {
    case HeadLayout::kClosed: return "closed";
    case HeadLayout::kNegative: return "negative";
    case HeadLayout::kDenseClosed: return "dense-closed";
    case HeadLayout::kDense: return "dense";
  }
  return "closed";
}

HeadLayout ParseHeadLayout(std::string_view name) {
  for (HeadLayout l : {HeadLayout::kClosed, HeadLayout::kNegative,
                       HeadLayout::kDenseClosed, HeadLayout::kDense}) {
    if (HeadLayoutName(l) == name) return l;
  }
  throw ConfigError("unknown head layout '" + std::string(name) + "'");
}

std::size_t NumClasses(HeadLayout layout, std::size_t k) {
  switch (layout) {
    case HeadLayout::kClosed: return k;
    case HeadLayout::kNegative:
    case HeadLayout::kDenseClosed: return k + 1;
    case HeadLayout::kDense: return k + 2;
  }
  return k;
}

namespace {

std::vector<std::size_t> Widths(const FeatureConfig& c) {
  std::vector<std::size_t> w{c.in_dim};
  w.insert(w.end(), c.hidden.begin(), c.hidden.end());
  w.push_back(c.feature_dim);
  return w;
}

}  // namespace

FeatureExtractor::FeatureExtractor(const FeatureConfig& config, Rng& rng)
    : config_(config),
      mlp_("features", Widths(config), config.hidden_activation,
           config.output_activation, rng) {}

Var FeatureExtractor::Forward(Tape& tape, Var x) const {
  return mlp_.Forward(tape, x);
}

Tensor FeatureExtractor::Features(const Tensor& x) const {
  return mlp_.Evaluate(x);
}

ClassifierHead::ClassifierHead(std::size_t d, std::size_t k, HeadLayout layout,
                               Rng& rng, std::string name)
    : name_(std::move(name)),
      k_(k),
      layout_(layout),
      weight_(name_ + ".weight", Tensor(Shape{NumClasses(layout, k), d})),
      bias_(name_ + ".bias", Tensor(Shape{NumClasses(layout, k)})) {
  if (k == 0) throw ConfigError("a head needs at least one inlier class");
  if (d == 0) throw ConfigError("feature dimension must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& w : weight_.value().storage()) w = rng.Uniform(-bound, bound);
}

Var ClassifierHead::Forward(Tape& tape, Var z) const {
  if (z.shape().size() != 2 || z.shape()[1] != feature_dim()) {
    throw ShapeError("head expects [batch, " + std::to_string(feature_dim()) +
                     "], got " + ShapeToString(z.shape()));
  }
  return grad::Add(grad::MatMul(z, grad::Transpose(tape.Param(weight_))),
                   tape.Param(bias_));
}

Tensor ClassifierHead::Logits(const Tensor& z) const {
  Tape tape;
  return Forward(tape, tape.Constant(z)).value();
}

std::size_t ClassifierHead::negative_column() const {
  if (!has_negative()) {
    throw ConfigError("head layout '" + std::string(HeadLayoutName(layout_)) +
                      "' has no negative class");
  }
  return k_;
}

std::size_t ClassifierHead::no_object_column() const {
  switch (layout_) {
    case HeadLayout::kDense: return k_ + 1;
    case HeadLayout::kDenseClosed: return k_;
    default: break;
  }
  throw ConfigError("head layout '" + std::string(HeadLayoutName(layout_)) +
                    "' has no no-object class");
}

void ClassifierHead::InsertClasses(std::size_t at, std::size_t n_new,
                                   HeadLayout new_layout) {
  const std::size_t c = num_classes();
  const std::size_t d = feature_dim();
  if (at > c) throw ContractError("insert position past the last class");
  if (NumClasses(new_layout, k_) != c + n_new) {
    throw ContractError("new layout does not match the extended class count");
  }
  Tensor w(Shape{c + n_new, d});
  Tensor b(Shape{c + n_new});
  const Tensor& ow = weight_.value();
  const Tensor& ob = bias_.value();
  for (std::size_t r = 0; r < c; ++r) {
    const std::size_t dst = r < at ? r : r + n_new;
    for (std::size_t j = 0; j < d; ++j) w.at(dst, j) = ow.at(r, j);
    b[dst] = ob[r];
  }
  const bool w_trainable = weight_.trainable();
  const bool b_trainable = bias_.trainable();
  weight_ = Parameter(name_ + ".weight", std::move(w));
  bias_ = Parameter(name_ + ".bias", std::move(b));
  weight_.set_trainable(w_trainable);
  bias_.set_trainable(b_trainable);
  layout_ = new_layout;
}

ClassifierHead ExtendHead(const ClassifierHead& head, std::size_t n_new) {
  if (n_new != 1) {
    throw ConfigError("heads are extended by exactly one negative class");
  }
  ClassifierHead out = head;
  switch (head.layout()) {
    case HeadLayout::kClosed:
      out.InsertClasses(head.num_classes(), 1, HeadLayout::kNegative);
      break;
    case HeadLayout::kDenseClosed:
      out.InsertClasses(head.num_inlier(), 1, HeadLayout::kDense);
      break;
    default:
      throw ConfigError("head already carries a negative class");
  }
  return out;
}

Var OpenSetModel::Logits(Tape& tape, Var x) const {
  return head.Forward(tape, features.Forward(tape, x));
}

Tensor OpenSetModel::Logits(const Tensor& x) const {
  Tape tape;
  return Logits(tape, tape.Constant(x)).value();
}

Tensor OpenSetModel::Posterior(const Tensor& x) const {
  return Softmax(Logits(x));
}

std::vector<Parameter*> OpenSetModel::parameters() {
  std::vector<Parameter*> out = features.parameters();
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> OpenSetModel::parameters() const {
  std::vector<const Parameter*> out = features.parameters();
  for (const Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

OpenSetModel MakeOpenSetModel(const FeatureConfig& features, std::size_t k,
                              HeadLayout layout, Rng& rng) {
  FeatureExtractor h(features, rng);
  ClassifierHead g(features.feature_dim, k, layout, rng);
  return OpenSetModel{std::move(h), std::move(g)};
}

std::vector<double> Softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lz = m + std::log(z);
  std::vector<double> p(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) p[j] = std::exp(logits[j] - lz);
  return p;
}

Tensor Softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax expects [batch, C], got " +
                     ShapeToString(logits.shape()));
  }
  Tensor out(logits.shape());
  const std::size_t c = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    const std::vector<double> p =
        Softmax(logits.data().subspan(r * c, c));
    std::copy(p.begin(), p.end(), out.data().begin() + r * c);
  }
  return out;
}

std::vector<int> ArgmaxLabels(const Tensor& logits, std::size_t limit) {
  if (logits.rank() != 2) {
    throw ShapeError("argmax expects [batch, C], got " +
                     ShapeToString(logits.shape()));
  }
  const std::size_t c = logits.dim(1);
  const std::size_t n = limit == 0 ? c : std::min(limit, c);
  std::vector<int> out(logits.dim(0));
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (logits.at(r, j) > logits.at(r, best)) best = j;
    }
    out[r] = static_cast<int>(best) + 1;
  }
  return out;
}

Tensor ClassVectorCosines(const ClassifierHead& head) {
  const Tensor& w = head.weight().value();
  const std::size_t c = w.dim(0), d = w.dim(1);
  std::vector<double> norms(c);
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += w.at(i, j) * w.at(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw DomainError("class vector " + std::to_string(i + 1) +
                        " has zero norm; cosine undefined");
    }
  }
  Tensor out(Shape{c, c});
  for (std::size_t a = 0; a < c; ++a) {
    out.at(a, a) = 1.0;
    for (std::size_t b = a + 1; b < c; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += w.at(a, j) * w.at(b, j);
      const double cos = dot / (norms[a] * norms[b]);
      out.at(a, b) = cos;
      out.at(b, a) = cos;
    }
  }
  return out;
}

double MaxOffDiagonalCosine(const Tensor& cosines) {
  double best = 0.0;
  for (std::size_t a = 0; a < cosines.dim(0); ++a) {
    for (std::size_t b = 0; b < cosines.dim(1); ++b) {
      if (a != b) best = std::max(best, std::abs(cosines.at(a, b)));
    }
  }
  return best;
}

void SaveModel(const std::filesystem::path& dir, const OpenSetModel& model) {
  TensorArchive archive;
  archive.format = "uno.model";
  const FeatureConfig& f = model.features.config();
  archive.meta["in_dim"] = f.in_dim;
  archive.meta["hidden"] = f.hidden;
  archive.meta["feature_dim"] = f.feature_dim;
  archive.meta["hidden_activation"] = nn::ActivationName(f.hidden_activation);
  archive.meta["output_activation"] = nn::ActivationName(f.output_activation);
  archive.meta["num_inlier"] = model.head.num_inlier();
  archive.meta["num_classes"] = model.head.num_classes();
  archive.meta["layout"] = HeadLayoutName(model.head.layout());
  archive.meta["labels"] =
      "1-based: 1..K inlier, K+1 negative, K+2 no-object (dense)";
  StoreParameters(archive, model.parameters());
  SaveArchive(dir, archive);
}

OpenSetModel LoadModel(const std::filesystem::path& dir) {
  const TensorArchive archive = LoadArchive(dir, "uno.model");
  const Json& m = archive.meta;
  FeatureConfig f;
  f.in_dim = RequireSize(m, "in_dim");
  const Json& hidden = RequireKey(m, "hidden");
  if (!hidden.is_array()) {
    throw MalformedManifestError("manifest key 'hidden' must be an array");
  }
  f.hidden.clear();
  for (const Json& h : hidden) {
    if (!h.is_number_unsigned()) {
      throw MalformedManifestError("hidden widths must be positive integers");
    }
    f.hidden.push_back(h.get<std::size_t>());
  }
  f.feature_dim = RequireSize(m, "feature_dim");
  try {
    f.hidden_activation =
        nn::ParseActivation(RequireString(m, "hidden_activation"));
    f.output_activation =
        nn::ParseActivation(RequireString(m, "output_activation"));
  } catch (const ConfigError& e) {
    throw MalformedManifestError(e.what());
  }
  const std::size_t k = RequireSize(m, "num_inlier");
  HeadLayout layout;
  try {
    layout = ParseHeadLayout(RequireString(m, "layout"));
  } catch (const ConfigError& e) {
    throw MalformedManifestError(e.what());
  }
  if (NumClasses(layout, k) != RequireSize(m, "num_classes")) {
    throw MalformedManifestError("num_classes disagrees with layout");
  }
  Rng unused(0);
  OpenSetModel model = MakeOpenSetModel(f, k, layout, unused);
  RestoreParameters(archive, model.parameters());
  return model;
}

}  // namespace uno::net
