// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_GRADCHECK_H_
#define UNO_GRADCHECK_H_

#include <functional>
#include <span>

#include "uno/autodiff.h"

namespace uno::grad {

// f maps an input node on `tape` to a one-element output.
using ScalarFunction = std::function<Var(Tape& tape, Var input)>;

// max_i |autodiff_i - central_i| / max(1, |central_i|) at `point`.
double GradCheck(const ScalarFunction& f, const Tensor& point, double h);

// Same measure for a loss over model parameters. `loss` must build its graph
// on the given tape through Tape::Param; every entry of every parameter in
// `params` is perturbed in place and restored afterwards.
double GradCheckParams(const std::function<Var(Tape& tape)>& loss,
                       std::span<Parameter* const> params, double h);

}  // namespace uno::grad

#endif  // UNO_GRADCHECK_H_
