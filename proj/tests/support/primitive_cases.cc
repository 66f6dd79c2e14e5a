// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "support/primitive_cases.h"

#include <cmath>

namespace uno::testing {

using grad::Primitive;
using grad::Tape;
using grad::Var;

Tensor RandomTensor(Shape shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.Normal();
  return t;
}

namespace {

// Values bounded away from zero so a +-h probe never crosses a kink.
Tensor AwayFromZero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = 0.05 + rng.Uniform(0.0, 2.0);
    t[i] = rng.Uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Rows whose entries are pairwise separated by at least 0.05.
Tensor DistinctRows(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t.at(r, c) = 0.3 * static_cast<double>(c) + rng.Uniform(0.0, 0.2);
    }
    for (std::size_t c = cols; c-- > 1;) {
      std::swap(t.at(r, c), t.at(r, rng.UniformInt(c + 1)));
    }
  }
  return t;
}

// Contracts an arbitrary tensor with fixed random weights.
Var Contract(Tape& tape, Var y, const Tensor& w) {
  return grad::Sum(grad::Mul(y, tape.Constant(w)));
}

}  // namespace

std::vector<PrimitiveCase> MakePrimitiveCases(Rng& rng) {
  std::vector<PrimitiveCase> cases;
  auto add = [&](std::string label, Primitive op, grad::ScalarFunction fn,
                 Tensor point) {
    cases.push_back({std::move(label), op, std::move(fn), std::move(point)});
  };

  {
    const Tensor b = RandomTensor({4, 2}, rng);
    const Tensor w = RandomTensor({3, 2}, rng);
    add("matmul/lhs", Primitive::kMatMul,
        [b, w](Tape& t, Var x) { return Contract(t, grad::MatMul(x, t.Constant(b)), w); },
        RandomTensor({3, 4}, rng));
    const Tensor a = RandomTensor({3, 4}, rng);
    add("matmul/rhs", Primitive::kMatMul,
        [a, w](Tape& t, Var x) { return Contract(t, grad::MatMul(t.Constant(a), x), w); },
        RandomTensor({4, 2}, rng));
  }
  const Primitive binary[] = {Primitive::kAdd, Primitive::kSubtract,
                              Primitive::kMultiply};
  for (Primitive op : binary) {
    const std::string name(grad::PrimitiveName(op));
    const Tensor other = RandomTensor({3, 4}, rng);
    const Tensor row = RandomTensor({4}, rng);
    const Tensor w = RandomTensor({3, 4}, rng);
    auto apply = [op](Var a, Var b) {
      const Var in[] = {a, b};
      return a.tape()->Apply(op, in);
    };
    add(name + "/lhs", op,
        [=](Tape& t, Var x) { return Contract(t, apply(x, t.Constant(other)), w); },
        RandomTensor({3, 4}, rng));
    add(name + "/rhs", op,
        [=](Tape& t, Var x) { return Contract(t, apply(t.Constant(other), x), w); },
        RandomTensor({3, 4}, rng));
    add(name + "/broadcast-lhs", op,
        [=](Tape& t, Var x) { return Contract(t, apply(x, t.Constant(row)), w); },
        RandomTensor({3, 4}, rng));
    add(name + "/broadcast-rhs", op,
        [=](Tape& t, Var x) { return Contract(t, apply(t.Constant(other), x), w); },
        RandomTensor({4}, rng));
  }
  struct UnaryCase {
    Primitive op;
    Var (*f)(Var);
  };
  const UnaryCase unary[] = {
      {Primitive::kExp, grad::Exp},         {Primitive::kLog, grad::Log},
      {Primitive::kTanh, grad::Tanh},       {Primitive::kRelu, grad::Relu},
      {Primitive::kSigmoid, grad::Sigmoid}, {Primitive::kSoftplus, grad::Softplus},
      {Primitive::kNegate, grad::Neg},
  };
  for (const auto& u : unary) {
    const Tensor w = RandomTensor({3, 4}, rng);
    Tensor point = u.op == Primitive::kRelu ? AwayFromZero({3, 4}, rng)
                                            : RandomTensor({3, 4}, rng);
    if (u.op == Primitive::kLog) {
      for (std::size_t i = 0; i < point.size(); ++i) point[i] = std::exp(0.5 * point[i]);
    }
    auto f = u.f;
    add(std::string(grad::PrimitiveName(u.op)), u.op,
        [=](Tape& t, Var x) { return Contract(t, f(x), w); }, std::move(point));
  }
  add("sum", Primitive::kSum,
      [](Tape&, Var x) { return grad::Sum(grad::Mul(x, x)); },
      RandomTensor({3, 4}, rng));
  add("mean", Primitive::kMean,
      [](Tape&, Var x) { return grad::Mean(grad::Mul(x, x)); },
      RandomTensor({3, 4}, rng));
  {
    const Tensor w = RandomTensor({3}, rng);
    add("sum_last_axis", Primitive::kSumLastAxis,
        [w](Tape& t, Var x) { return Contract(t, grad::SumLastAxis(x), w); },
        RandomTensor({3, 4}, rng));
    add("max_last_axis", Primitive::kMaxLastAxis,
        [w](Tape& t, Var x) { return Contract(t, grad::MaxLastAxis(x), w); },
        DistinctRows(3, 4, rng));
  }
  {
    const Tensor w = RandomTensor({3, 5}, rng);
    add("log_softmax", Primitive::kLogSoftmax,
        [w](Tape& t, Var x) { return Contract(t, grad::LogSoftmax(x), w); },
        RandomTensor({3, 5}, rng, 2.0));
  }
  {
    const Tensor c = RandomTensor({3, 3}, rng);
    const Tensor w = RandomTensor({3, 7}, rng);
    add("concat", Primitive::kConcat,
        [c, w](Tape& t, Var x) {
          return Contract(t, grad::Concat({x, t.Constant(c), x}), w);
        },
        RandomTensor({3, 2}, rng));
  }
  {
    const Tensor w = RandomTensor({3, 3}, rng);
    add("slice", Primitive::kSlice,
        [w](Tape& t, Var x) { return Contract(t, grad::Slice(x, 1, 4), w); },
        RandomTensor({3, 5}, rng));
  }
  {
    const Tensor w = RandomTensor({4, 3}, rng);
    add("transpose", Primitive::kTranspose,
        [w](Tape& t, Var x) { return Contract(t, grad::Transpose(x), w); },
        RandomTensor({3, 4}, rng));
  }
  {
    const Tensor w = RandomTensor({2, 6}, rng);
    add("reshape", Primitive::kReshape,
        [w](Tape& t, Var x) { return Contract(t, grad::Reshape(x, {2, 6}), w); },
        RandomTensor({3, 4}, rng));
  }
  return cases;
}

}  // namespace uno::testing
