// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "uno/errors.h"

namespace uno::grad {
namespace {

double Evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  return f(tape, tape.Constant(x)).value().item();
}

double RelErr(double ad, double fd) {
  return std::abs(ad - fd) / std::max(1.0, std::abs(fd));
}

}  // namespace

double GradCheck(const ScalarFunction& f, const Tensor& point, double h) {
  if (!(h > 0.0)) throw ContractError("GradCheck needs h > 0");
  Tape tape;
  Var x = tape.Leaf(point);
  Var y = f(tape, x);
  tape.Backward(y);
  const Tensor ad = tape.Grad(x);

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = Evaluate(f, probe);
    probe[i] = orig - h;
    const double down = Evaluate(f, probe);
    probe[i] = orig;
    worst = std::max(worst, RelErr(ad[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double GradCheckParams(const std::function<Var(Tape& tape)>& loss,
                       std::span<Parameter* const> params, double h) {
  if (!(h > 0.0)) throw ContractError("GradCheckParams needs h > 0");
  GradientMap grads;
  {
    Tape tape;
    grads = tape.Backward(loss(tape));
  }
  auto eval = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    auto it = grads.find(p->id());
    const Tensor ad =
        it == grads.end() ? Tensor(p->value().shape(), 0.0) : it->second;
    Tensor& v = p->value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double up = eval();
      v[i] = orig - h;
      const double down = eval();
      v[i] = orig;
      worst = std::max(worst, RelErr(ad[i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace uno::grad
