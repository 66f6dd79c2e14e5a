// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_OPTIM_H_
#define UNO_OPTIM_H_

#include <map>
#include <span>

#include "uno/autodiff.h"

namespace uno::grad {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Updates every trainable parameter in `params` from its entry in `grads`.
  // Throws ContractError if a trainable parameter has no gradient entry.
  virtual void Step(std::span<Parameter* const> params, const GradientMap& grads,
                    double lr) = 0;
};

// Momentum SGD with coupled L2 weight decay:
//   v <- momentum * v + (g + weight_decay * p)
//   p <- p - lr * v
// Velocity is kept per parameter id, so parameter groups with different
// learning rates can share one optimizer by calling Step() per group.
class SgdMomentum : public Optimizer {
 public:
  SgdMomentum(double momentum, double weight_decay);

  void Step(std::span<Parameter* const> params, const GradientMap& grads,
            double lr) override;

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double momentum_;
  double weight_decay_;
  std::map<ParamId, Tensor> velocity_;
};

// Adam with bias-corrected moment estimates and no weight decay. Moments and
// step counts are kept per parameter id.
class Adam : public Optimizer {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void Step(std::span<Parameter* const> params, const GradientMap& grads,
            double lr) override;

 private:
  struct Moments {
    Tensor m;
    Tensor v;
    std::size_t t = 0;
  };
  double beta1_;
  double beta2_;
  double eps_;
  std::map<ParamId, Moments> state_;
};

// Rescales the gradients of `params` in place so that their joint L2 norm is
// at most max_norm. Returns the norm before clipping. Parameters without a
// gradient entry are skipped.
double ClipGradNorm(GradientMap& grads, std::span<Parameter* const> params,
                    double max_norm);

}  // namespace uno::grad

#endif  // UNO_OPTIM_H_
