// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_NN_H_
#define UNO_NN_H_

#include <string>
#include <string_view>
#include <vector>

#include "uno/autodiff.h"
#include "uno/rng.h"

namespace uno::nn {

enum class Activation { kIdentity, kTanh, kRelu };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

grad::Var Activate(grad::Var x, Activation a);

// y = x W + b with W stored [in, out].
struct Linear {
  grad::Parameter weight;
  grad::Parameter bias;

  // Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases, or exact zeros.
  Linear(std::string_view name, std::size_t in, std::size_t out, Rng& rng,
         bool zero_init = false);

  std::size_t in_dim() const { return weight.value().dim(0); }
  std::size_t out_dim() const { return weight.value().dim(1); }

  grad::Var Forward(grad::Tape& tape, grad::Var x) const;
};

// Fully connected stack; `hidden` after every layer but the last, `output`
// after the last.
class Mlp {
 public:
  Mlp(std::string_view name, const std::vector<std::size_t>& widths,
      Activation hidden, Activation output, Rng& rng,
      bool zero_init_last = false);

  grad::Var Forward(grad::Tape& tape, grad::Var x) const;
  // Tape-free evaluation on a [batch, in] tensor.
  Tensor Evaluate(const Tensor& x) const;

  std::vector<grad::Parameter*> parameters();
  std::vector<const grad::Parameter*> parameters() const;

  std::vector<std::size_t> widths() const;
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

  void SetTrainable(bool trainable);

 private:
  std::vector<Linear> layers_;
  Activation hidden_;
  Activation output_;
};

}  // namespace uno::nn

#endif  // UNO_NN_H_
