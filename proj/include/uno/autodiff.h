// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Define-by-run reverse-mode automatic differentiation.
//
// A Tape records every primitive applied to at least one gradient-carrying
// input. Nodes are appended in evaluation order, so the record list is
// topologically sorted by construction and Backward() is a single reverse
// sweep. Gradients from fan-out accumulate additively. A tape supports one
// backward pass; build a new tape for each forward evaluation.

#ifndef UNO_AUTODIFF_H_
#define UNO_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uno/tensor.h"

namespace uno::grad {

using ParamId = std::uint64_t;

// A named trainable tensor. Every Parameter object carries a process-unique
// id; copies receive a fresh id so optimizer state never aliases.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  ParamId id() const { return id_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  Tensor& value() { return value_; }
  const Tensor& value() const { return value_; }

  // Frozen parameters enter the tape as constants.
  bool trainable() const { return trainable_; }
  void set_trainable(bool trainable) { trainable_ = trainable; }

 private:
  ParamId id_;
  std::string name_;
  Tensor value_;
  bool trainable_ = true;
};

using GradientMap = std::map<ParamId, Tensor>;

enum class Primitive {
  kMatMul,      // [m,k] x [k,n]
  kAdd,         // elementwise; shorter operand broadcast over leading dims
  kSubtract,
  kMultiply,
  kExp,
  kLog,
  kTanh,
  kRelu,        // subgradient 0 at 0
  kSigmoid,
  kSoftplus,    // log(1 + exp(x)), computed stably
  kNegate,
  kSum,         // all elements -> scalar
  kSumLastAxis,
  kMean,        // all elements -> scalar
  kMaxLastAxis, // gradient routed to the first maximal entry
  kLogSoftmax,  // over the last axis, max-subtracted
  kConcat,      // along the last axis
  kSlice,       // [begin, end) along the last axis
  kTranspose,   // 2-D
  kReshape,
};

inline constexpr Primitive kAllPrimitives[] = {
    Primitive::kMatMul,      Primitive::kAdd,        Primitive::kSubtract,
    Primitive::kMultiply,    Primitive::kExp,        Primitive::kLog,
    Primitive::kTanh,        Primitive::kRelu,       Primitive::kSigmoid,
    Primitive::kSoftplus,    Primitive::kNegate,     Primitive::kSum,
    Primitive::kSumLastAxis, Primitive::kMean,       Primitive::kMaxLastAxis,
    Primitive::kLogSoftmax,  Primitive::kConcat,     Primitive::kSlice,
    Primitive::kTranspose,   Primitive::kReshape,
};

std::string_view PrimitiveName(Primitive op);

struct PrimitiveAttrs {
  std::size_t begin = 0;  // kSlice
  std::size_t end = 0;    // kSlice
  Shape shape;            // kReshape
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  Var Scalar(double value) { return Constant(Tensor::Scalar(value)); }
  // Gradient-carrying input that is not a Parameter (used by checks).
  Var Leaf(Tensor value);
  // Repeated calls with the same parameter return the same node.
  Var Param(const Parameter& p);

  // Evaluates `op` and, if any input requires a gradient, records it.
  Var Apply(Primitive op, std::span<const Var> inputs,
            const PrimitiveAttrs& attrs = {});

  // Gradients of a one-element `loss` for every trainable parameter bound
  // to this tape. Callable once per tape.
  GradientMap Backward(Var loss);

  // Gradient of any node after Backward(); zeros if it received none.
  Tensor Grad(Var v) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  // Number of recorded (gradient-carrying, non-leaf) operations.
  std::size_t num_records() const;

  const Tensor& value(std::size_t index) const { return nodes_[index].value; }
  bool requires_grad(std::size_t index) const {
    return nodes_[index].requires_grad;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during Backward()
    bool requires_grad = false;
    bool recorded = false;
    std::optional<ParamId> param;
    Primitive op = Primitive::kAdd;
    std::vector<std::size_t> inputs;
    PrimitiveAttrs attrs;
  };

  Var Push(Node node);
  void Propagate(std::size_t index);
  Tensor& GradSlot(std::size_t index);

  std::deque<Node> nodes_;  // stable addresses: value() references survive Push
  std::unordered_map<ParamId, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

// Typed wrappers over Tape::Apply. All operands must share a tape.
Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Exp(Var a);
Var Log(Var a);
Var Tanh(Var a);
Var Relu(Var a);
Var Sigmoid(Var a);
Var Softplus(Var a);
Var Neg(Var a);
Var Sum(Var a);
Var SumLastAxis(Var a);
Var Mean(Var a);
Var MaxLastAxis(Var a);
Var LogSoftmax(Var a);
Var Concat(std::span<const Var> parts);
Var Concat(std::initializer_list<Var> parts);
Var Slice(Var a, std::size_t begin, std::size_t end);
Var Transpose(Var a);
Var Reshape(Var a, Shape shape);

Var Scale(Var a, double c);
Var AddScalar(Var a, double c);
Var Square(Var a);

// Elementwise operators for readability in loss code.
inline Var operator+(Var a, Var b) { return Add(a, b); }
inline Var operator-(Var a, Var b) { return Sub(a, b); }
inline Var operator*(Var a, Var b) { return Mul(a, b); }
inline Var operator-(Var a) { return Neg(a); }
inline Var operator*(double c, Var a) { return Scale(a, c); }

}  // namespace uno::grad

#endif  // UNO_AUTODIFF_H_
