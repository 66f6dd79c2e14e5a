// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_TESTS_SUPPORT_PRIMITIVE_CASES_H_
#define UNO_TESTS_SUPPORT_PRIMITIVE_CASES_H_

#include <string>
#include <vector>

#include "uno/gradcheck.h"
#include "uno/rng.h"

namespace uno::testing {

// One scalar function exercising a primitive plus a point at which to
// differentiate it. Binary primitives get one case per differentiated operand.
struct PrimitiveCase {
  std::string label;
  grad::Primitive op;
  grad::ScalarFunction fn;
  Tensor point;
};

// Cases for every primitive with fresh random operands drawn from `rng`.
// Points are kept away from the non-differentiable sets of relu/max.
std::vector<PrimitiveCase> MakePrimitiveCases(Rng& rng);

Tensor RandomTensor(Shape shape, Rng& rng, double scale = 1.0);

}  // namespace uno::testing

#endif  // UNO_TESTS_SUPPORT_PRIMITIVE_CASES_H_
