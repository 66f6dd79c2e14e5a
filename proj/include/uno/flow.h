// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Affine-coupling normalizing flow with a standard-normal base.
//
// The flow maps data x to latents u = T(x). Each coupling layer keeps one
// half of the coordinates and transforms the other:
//   u_active = x_active * exp(s(x_pass)) + t(x_pass),  s = clamp * tanh(raw)
// so log|det dT/dx| is the sum of the active scale outputs. Layers alternate
// which half passes through. Sampling draws u ~ N(0, I) and inverts.

#ifndef UNO_FLOW_H_
#define UNO_FLOW_H_

#include <filesystem>
#include <utility>
#include <vector>

#include "uno/autodiff.h"
#include "uno/nn.h"
#include "uno/rng.h"

namespace uno::flow {

struct FlowConfig {
  std::size_t dim = 2;
  std::size_t num_layers = 6;
  std::size_t hidden = 64;
  double scale_clamp = 4.0;
};

struct ForwardResult {
  grad::Var latent;  // [batch, dim]
  grad::Var logdet;  // [batch]
};

class CouplingLayer {
 public:
  CouplingLayer(std::string_view name, std::size_t dim, bool pass_first,
                std::size_t hidden, double clamp, Rng& rng);

  ForwardResult Forward(grad::Tape& tape, grad::Var x) const;
  grad::Var Inverse(grad::Tape& tape, grad::Var u) const;

  bool pass_first() const { return pass_first_; }
  std::size_t pass_dim() const;
  std::size_t active_dim() const { return dim_ - pass_dim(); }
  double clamp() const { return clamp_; }

  nn::Mlp& scale_net() { return scale_net_; }
  nn::Mlp& shift_net() { return shift_net_; }
  const nn::Mlp& scale_net() const { return scale_net_; }
  const nn::Mlp& shift_net() const { return shift_net_; }

 private:
  struct Halves {
    grad::Var pass;
    grad::Var active;
  };
  Halves Split(grad::Var v) const;
  grad::Var Merge(grad::Var pass, grad::Var active) const;
  grad::Var Scale(grad::Tape& tape, grad::Var pass) const;

  std::size_t dim_;
  std::size_t split_;
  bool pass_first_;
  double clamp_;
  nn::Mlp scale_net_;
  nn::Mlp shift_net_;
};

class FlowModel {
 public:
  // Final layers of every scale/shift net start at zero: an identity flow.
  FlowModel(const FlowConfig& config, Rng& rng);

  const FlowConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }

  ForwardResult Forward(grad::Tape& tape, grad::Var x) const;
  // Layers applied in reverse order.
  grad::Var Inverse(grad::Tape& tape, grad::Var u) const;
  // log p(x) = log N(T(x); 0, I) + log|det dT/dx|, per sample.
  grad::Var LogProb(grad::Tape& tape, grad::Var x) const;
  // Differentiable samples: the inverse applied to fixed base noise.
  grad::Var SampleFromNoise(grad::Tape& tape, const Tensor& noise) const;

  std::pair<Tensor, Tensor> Forward(const Tensor& x) const;
  Tensor Inverse(const Tensor& u) const;
  Tensor LogProb(const Tensor& x) const;
  // n >= 0 samples; n == 0 yields a [0, dim] tensor.
  Tensor Sample(std::size_t n, Rng& rng) const;
  Tensor BaseNoise(std::size_t n, Rng& rng) const;

  std::vector<CouplingLayer>& layers() { return layers_; }
  const std::vector<CouplingLayer>& layers() const { return layers_; }

  std::vector<grad::Parameter*> parameters();
  std::vector<const grad::Parameter*> parameters() const;
  void Freeze();
  bool frozen() const;

 private:
  void CheckDim(const Shape& shape) const;

  FlowConfig config_;
  std::vector<CouplingLayer> layers_;
};

// Standard-normal log density per row of a [batch, d] latent.
grad::Var StandardNormalLogProb(grad::Var u);

// Manifest records dim, layer count, hidden width and clamp; parameters are
// stored as UNOT tensors. The frozen flag round-trips.
void SaveFlow(const std::filesystem::path& dir, const FlowModel& flow);
FlowModel LoadFlow(const std::filesystem::path& dir);

}  // namespace uno::flow

#endif  // UNO_FLOW_H_
