// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/optim.h"

#include <cmath>

#include "uno/errors.h"

namespace uno::grad {

SgdMomentum::SgdMomentum(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ContractError("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ContractError("weight_decay must be >= 0");
}

void SgdMomentum::Step(std::span<Parameter* const> params,
                       const GradientMap& grads, double lr) {
  if (!(lr > 0.0)) throw ContractError("learning rate must be > 0");
  for (Parameter* p : params) {
    if (!p->trainable()) continue;
    auto it = grads.find(p->id());
    if (it == grads.end()) {
      throw ContractError("no gradient for parameter '" + p->name() + "'");
    }
    const Tensor& g = it->second;
    Tensor& w = p->value();
    if (g.shape() != w.shape()) {
      throw ContractError("gradient shape mismatch for '" + p->name() + "'");
    }
    auto [vit, inserted] = velocity_.try_emplace(p->id(), w.shape(), 0.0);
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * w[i]);
      w[i] -= lr * v[i];
    }
  }
}

Adam::Adam(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("Adam eps must be > 0");
}

void Adam::Step(std::span<Parameter* const> params, const GradientMap& grads,
                double lr) {
  if (!(lr > 0.0)) throw ContractError("learning rate must be > 0");
  for (Parameter* p : params) {
    if (!p->trainable()) continue;
    auto it = grads.find(p->id());
    if (it == grads.end()) {
      throw ContractError("no gradient for parameter '" + p->name() + "'");
    }
    const Tensor& g = it->second;
    Tensor& w = p->value();
    if (g.shape() != w.shape()) {
      throw ContractError("gradient shape mismatch for '" + p->name() + "'");
    }
    auto [sit, inserted] = state_.try_emplace(
        p->id(), Moments{Tensor(w.shape(), 0.0), Tensor(w.shape(), 0.0), 0});
    Moments& st = sit->second;
    ++st.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g[i];
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
    }
  }
}

double ClipGradNorm(GradientMap& grads, std::span<Parameter* const> params,
                    double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("max_norm must be > 0");
  double sq = 0.0;
  for (Parameter* p : params) {
    auto it = grads.find(p->id());
    if (it == grads.end()) continue;
    for (double g : it->second.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
      auto it = grads.find(p->id());
      if (it == grads.end()) continue;
      for (double& g : it->second.data()) g *= scale;
    }
  }
  return norm;
}

}  // namespace uno::grad
