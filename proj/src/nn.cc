// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/nn.h"

#include <cmath>

#include "uno/errors.h"

namespace uno::nn {

using grad::Parameter;
using grad::Tape;
using grad::Var;

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Var Activate(Var x, Activation a) {
  switch (a) {
    case Activation::kTanh: return grad::Tanh(x);
    case Activation::kRelu: return grad::Relu(x);
    case Activation::kIdentity: break;
  }
  return x;
}

namespace {

Tensor UniformInit(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.Uniform(-bound, bound);
  return t;
}

}  // namespace

Linear::Linear(std::string_view name, std::size_t in, std::size_t out,
               Rng& rng, bool zero_init)
    : weight(std::string(name) + ".weight",
             zero_init ? Tensor(Shape{in, out})
                       : UniformInit(Shape{in, out},
                                     1.0 / std::sqrt(static_cast<double>(in)),
                                     rng)),
      bias(std::string(name) + ".bias",
           zero_init ? Tensor(Shape{out})
                     : UniformInit(Shape{out},
                                   1.0 / std::sqrt(static_cast<double>(in)),
                                   rng)) {}

Var Linear::Forward(Tape& tape, Var x) const {
  return grad::Add(grad::MatMul(x, tape.Param(weight)), tape.Param(bias));
}

Mlp::Mlp(std::string_view name, const std::vector<std::size_t>& widths,
         Activation hidden, Activation output, Rng& rng, bool zero_init_last)
    : hidden_(hidden), output_(output) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    layers_.emplace_back(std::string(name) + ".l" + std::to_string(i),
                         widths[i], widths[i + 1], rng, last && zero_init_last);
  }
}

Var Mlp::Forward(Tape& tape, Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != in_dim()) {
    throw ShapeError("MLP expects [batch, " + std::to_string(in_dim()) +
                     "], got " + ShapeToString(x.shape()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].Forward(tape, x);
    x = Activate(x, i + 1 == layers_.size() ? output_ : hidden_);
  }
  return x;
}

Tensor Mlp::Evaluate(const Tensor& x) const {
  Tape tape;
  return Forward(tape, tape.Constant(x)).value();
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w{in_dim()};
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

void Mlp::SetTrainable(bool trainable) {
  for (Parameter* p : parameters()) p->set_trainable(trainable);
}

}  // namespace uno::nn
