// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/flow.h"

#include <cmath>
#include <numbers>

#include "uno/checkpoint.h"
#include "uno/errors.h"

namespace uno::flow {

using grad::Tape;
using grad::Var;

CouplingLayer::CouplingLayer(std::string_view name, std::size_t dim,
                             bool pass_first, std::size_t hidden, double clamp,
                             Rng& rng)
    : dim_(dim),
      split_(dim / 2),
      pass_first_(pass_first),
      clamp_(clamp),
      scale_net_(std::string(name) + ".scale",
                 {pass_first ? dim / 2 : dim - dim / 2, hidden,
                  pass_first ? dim - dim / 2 : dim / 2},
                 nn::Activation::kTanh, nn::Activation::kIdentity, rng, true),
      shift_net_(std::string(name) + ".shift",
                 {pass_first ? dim / 2 : dim - dim / 2, hidden,
                  pass_first ? dim - dim / 2 : dim / 2},
                 nn::Activation::kTanh, nn::Activation::kIdentity, rng, true) {
  if (dim < 2) throw ConfigError("coupling layers need dim >= 2");
  if (!(clamp > 0.0)) throw ConfigError("scale clamp must be > 0");
}

std::size_t CouplingLayer::pass_dim() const {
  return pass_first_ ? split_ : dim_ - split_;
}

CouplingLayer::Halves CouplingLayer::Split(Var v) const {
  Var lo = grad::Slice(v, 0, split_);
  Var hi = grad::Slice(v, split_, dim_);
  return pass_first_ ? Halves{lo, hi} : Halves{hi, lo};
}

Var CouplingLayer::Merge(Var pass, Var active) const {
  return pass_first_ ? grad::Concat({pass, active})
                     : grad::Concat({active, pass});
}

Var CouplingLayer::Scale(Tape& tape, Var pass) const {
  return grad::Scale(grad::Tanh(scale_net_.Forward(tape, pass)), clamp_);
}

ForwardResult CouplingLayer::Forward(Tape& tape, Var x) const {
  Halves h = Split(x);
  Var s = Scale(tape, h.pass);
  Var t = shift_net_.Forward(tape, h.pass);
  Var active = grad::Add(grad::Mul(h.active, grad::Exp(s)), t);
  return {Merge(h.pass, active), grad::SumLastAxis(s)};
}

Var CouplingLayer::Inverse(Tape& tape, Var u) const {
  Halves h = Split(u);
  Var s = Scale(tape, h.pass);
  Var t = shift_net_.Forward(tape, h.pass);
  Var active = grad::Mul(grad::Sub(h.active, t), grad::Exp(grad::Neg(s)));
  return Merge(h.pass, active);
}

FlowModel::FlowModel(const FlowConfig& config, Rng& rng) : config_(config) {
  if (config.num_layers == 0) throw ConfigError("flow needs at least one layer");
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    layers_.emplace_back("flow.c" + std::to_string(i), config.dim, i % 2 == 0,
                         config.hidden, config.scale_clamp, rng);
  }
}

void FlowModel::CheckDim(const Shape& shape) const {
  if (shape.size() != 2 || shape[1] != config_.dim) {
    throw ShapeError("flow expects [batch, " + std::to_string(config_.dim) +
                     "], got " + ShapeToString(shape));
  }
}

ForwardResult FlowModel::Forward(Tape& tape, Var x) const {
  CheckDim(x.shape());
  const std::size_t batch = x.shape()[0];
  Var logdet = tape.Constant(Tensor(Shape{batch}));
  for (const auto& layer : layers_) {
    ForwardResult r = layer.Forward(tape, x);
    x = r.latent;
    logdet = grad::Add(logdet, r.logdet);
  }
  return {x, logdet};
}

Var FlowModel::Inverse(Tape& tape, Var u) const {
  CheckDim(u.shape());
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    u = it->Inverse(tape, u);
  }
  return u;
}

Var StandardNormalLogProb(Var u) {
  const double d = static_cast<double>(u.shape().back());
  Var sq = grad::SumLastAxis(grad::Square(u));
  return grad::AddScalar(grad::Scale(sq, -0.5),
                         -0.5 * d * std::log(2.0 * std::numbers::pi));
}

Var FlowModel::LogProb(Tape& tape, Var x) const {
  ForwardResult r = Forward(tape, x);
  return grad::Add(StandardNormalLogProb(r.latent), r.logdet);
}

Var FlowModel::SampleFromNoise(Tape& tape, const Tensor& noise) const {
  return Inverse(tape, tape.Constant(noise));
}

std::pair<Tensor, Tensor> FlowModel::Forward(const Tensor& x) const {
  Tape tape;
  ForwardResult r = Forward(tape, tape.Constant(x));
  return {r.latent.value(), r.logdet.value()};
}

Tensor FlowModel::Inverse(const Tensor& u) const {
  Tape tape;
  return Inverse(tape, tape.Constant(u)).value();
}

Tensor FlowModel::LogProb(const Tensor& x) const {
  Tape tape;
  return LogProb(tape, tape.Constant(x)).value();
}

Tensor FlowModel::BaseNoise(std::size_t n, Rng& rng) const {
  Tensor u(Shape{n, config_.dim});
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = rng.Normal();
  return u;
}

Tensor FlowModel::Sample(std::size_t n, Rng& rng) const {
  return Inverse(BaseNoise(n, rng));
}

std::vector<grad::Parameter*> FlowModel::parameters() {
  std::vector<grad::Parameter*> out;
  for (auto& l : layers_) {
    for (auto* p : l.scale_net().parameters()) out.push_back(p);
    for (auto* p : l.shift_net().parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const grad::Parameter*> FlowModel::parameters() const {
  std::vector<const grad::Parameter*> out;
  for (const auto& l : layers_) {
    for (auto* p : l.scale_net().parameters()) out.push_back(p);
    for (auto* p : l.shift_net().parameters()) out.push_back(p);
  }
  return out;
}

void FlowModel::Freeze() {
  for (auto* p : parameters()) p->set_trainable(false);
}

bool FlowModel::frozen() const {
  for (const auto* p : parameters()) {
    if (p->trainable()) return false;
  }
  return true;
}

void SaveFlow(const std::filesystem::path& dir, const FlowModel& flow) {
  TensorArchive archive;
  archive.format = "uno.flow";
  const FlowConfig& c = flow.config();
  archive.meta["dim"] = c.dim;
  archive.meta["num_layers"] = c.num_layers;
  archive.meta["hidden"] = c.hidden;
  archive.meta["scale_clamp"] = c.scale_clamp;
  archive.meta["frozen"] = flow.frozen();
  StoreParameters(archive, flow.parameters());
  SaveArchive(dir, archive);
}

FlowModel LoadFlow(const std::filesystem::path& dir) {
  const TensorArchive archive = LoadArchive(dir, "uno.flow");
  FlowConfig c;
  c.dim = RequireSize(archive.meta, "dim");
  c.num_layers = RequireSize(archive.meta, "num_layers");
  c.hidden = RequireSize(archive.meta, "hidden");
  c.scale_clamp = RequireDouble(archive.meta, "scale_clamp");
  Rng unused(0);
  FlowModel flow(c, unused);
  RestoreParameters(archive, flow.parameters());
  const Json& frozen = RequireKey(archive.meta, "frozen");
  if (frozen.is_boolean() && frozen.get<bool>()) flow.Freeze();
  return flow;
}

}  // namespace uno::flow
