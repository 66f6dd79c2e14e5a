// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uno/autodiff.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "uno/errors.h"

namespace uno::grad {
namespace {

std::atomic<ParamId> g_next_param_id{1};

ParamId NextParamId() { return g_next_param_id.fetch_add(1); }

[[noreturn]] void Conformance(Primitive op, const std::string& detail) {
  throw ShapeError(std::string(PrimitiveName(op)) + ": " + detail);
}

bool IsSuffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a broadcasting binary op; the shorter operand's shape must
// be a trailing suffix of the longer one.
Shape BroadcastShape(Primitive op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (IsSuffix(b, a)) return a;
  if (IsSuffix(a, b)) return b;
  Conformance(op, "cannot broadcast " + ShapeToString(a) + " with " +
                      ShapeToString(b));
}

std::size_t LastDim(Primitive op, const Tensor& t) {
  if (t.rank() == 0) Conformance(op, "needs rank >= 1");
  return t.shape().back();
}

Shape DropLast(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

std::size_t ArgMax(const double* p, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (p[j] > p[best]) best = j;
  }
  return best;
}

void MatMulInto(const Tensor& a, const Tensor& b, Tensor& out, bool a_t,
                bool b_t, bool accumulate) {
  // out[m,n] (+)= op(a)[m,k] * op(b)[k,n] where op is optional transpose.
  const std::size_t m = a_t ? a.dim(1) : a.dim(0);
  const std::size_t k = a_t ? a.dim(0) : a.dim(1);
  const std::size_t n = b_t ? b.dim(0) : b.dim(1);
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  if (!accumulate) std::fill(C, C + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_t ? A[p * m + i] : A[i * k + p];
      if (av == 0.0) continue;
      double* crow = C + i * n;
      if (!b_t) {
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * B[j * k + p];
      }
    }
  }
}

std::size_t Arity(Primitive op) {
  switch (op) {
    case Primitive::kMatMul:
    case Primitive::kAdd:
    case Primitive::kSubtract:
    case Primitive::kMultiply:
      return 2;
    case Primitive::kConcat:
      return 0;  // variadic
    default:
      return 1;
  }
}

Tensor Forward(Primitive op, std::span<const Tensor* const> in,
               const PrimitiveAttrs& attrs) {
  const std::size_t arity = Arity(op);
  if (arity != 0 && in.size() != arity) {
    Conformance(op, "expects " + std::to_string(arity) + " inputs, got " +
                        std::to_string(in.size()));
  }
  switch (op) {
    case Primitive::kMatMul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        Conformance(op, ShapeToString(a.shape()) + " x " +
                            ShapeToString(b.shape()));
      }
      Tensor out(Shape{a.dim(0), b.dim(1)});
      MatMulInto(a, b, out, false, false, false);
      return out;
    }
    case Primitive::kAdd:
    case Primitive::kSubtract:
    case Primitive::kMultiply: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      Tensor out(BroadcastShape(op, a.shape(), b.shape()));
      const std::size_t n = out.size(), na = a.size(), nb = b.size();
      const double* pa = a.data().data();
      const double* pb = b.data().data();
      double* po = out.data().data();
      // The shorter operand repeats every `period` elements.
      const std::size_t period = std::min(na, nb);
      for (std::size_t base = 0; base < n; base += period) {
        const double* x = na == n ? pa + base : pa;
        const double* y = nb == n ? pb + base : pb;
        double* z = po + base;
        switch (op) {
          case Primitive::kAdd:
            for (std::size_t j = 0; j < period; ++j) z[j] = x[j] + y[j];
            break;
          case Primitive::kSubtract:
            for (std::size_t j = 0; j < period; ++j) z[j] = x[j] - y[j];
            break;
          default:
            for (std::size_t j = 0; j < period; ++j) z[j] = x[j] * y[j];
            break;
        }
      }
      return out;
    }
    case Primitive::kExp:
    case Primitive::kLog:
    case Primitive::kTanh:
    case Primitive::kRelu:
    case Primitive::kSigmoid:
    case Primitive::kSoftplus:
    case Primitive::kNegate: {
      const Tensor& a = *in[0];
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        double y = 0;
        switch (op) {
          case Primitive::kExp: y = std::exp(x); break;
          case Primitive::kLog:
            if (!(x > 0.0)) {
              throw DomainError("log of non-positive value " +
                                std::to_string(x));
            }
            y = std::log(x);
            break;
          case Primitive::kTanh: y = std::tanh(x); break;
          case Primitive::kRelu: y = x > 0.0 ? x : 0.0; break;
          case Primitive::kSigmoid: y = StableSigmoid(x); break;
          case Primitive::kSoftplus: y = StableSoftplus(x); break;
          default: y = -x; break;
        }
        out[i] = y;
      }
      return out;
    }
    case Primitive::kSum:
    case Primitive::kMean: {
      const Tensor& a = *in[0];
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (op == Primitive::kMean) {
        if (a.size() == 0) Conformance(op, "mean of empty tensor");
        s /= static_cast<double>(a.size());
      }
      return Tensor::Scalar(s);
    }
    case Primitive::kSumLastAxis:
    case Primitive::kMaxLastAxis:
    case Primitive::kLogSoftmax: {
      const Tensor& a = *in[0];
      const std::size_t n = LastDim(op, a);
      if (n == 0 && op != Primitive::kSumLastAxis) {
        Conformance(op, "empty last axis");
      }
      const std::size_t rows = n ? a.size() / n : NumElements(DropLast(a.shape()));
      if (op == Primitive::kLogSoftmax) {
        Tensor out(a.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double* x = a.data().data() + r * n;
          double* y = out.data().data() + r * n;
          const double m = x[ArgMax(x, n)];
          double z = 0.0;
          for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - m);
          const double lz = m + std::log(z);
          for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lz;
        }
        return out;
      }
      Tensor out(DropLast(a.shape()));
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * n;
        if (op == Primitive::kSumLastAxis) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += x[j];
          out[r] = s;
        } else {
          out[r] = x[ArgMax(x, n)];
        }
      }
      return out;
    }
    case Primitive::kConcat: {
      if (in.empty()) Conformance(op, "needs at least one input");
      const Shape lead = DropLast(in[0]->shape());
      std::size_t total = 0;
      for (const Tensor* t : in) {
        if (t->rank() == 0 || DropLast(t->shape()) != lead) {
          Conformance(op, "leading shapes differ: " +
                              ShapeToString(in[0]->shape()) + " vs " +
                              ShapeToString(t->shape()));
        }
        total += t->shape().back();
      }
      Shape s = lead;
      s.push_back(total);
      Tensor out(s);
      const std::size_t rows = NumElements(lead);
      for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (const Tensor* t : in) {
          const std::size_t w = t->shape().back();
          std::copy_n(t->data().data() + r * w, w,
                      out.data().data() + r * total + off);
          off += w;
        }
      }
      return out;
    }
    case Primitive::kSlice: {
      const Tensor& a = *in[0];
      const std::size_t n = LastDim(op, a);
      if (attrs.begin > attrs.end || attrs.end > n) {
        Conformance(op, "range [" + std::to_string(attrs.begin) + ", " +
                            std::to_string(attrs.end) + ") outside last dim " +
                            std::to_string(n));
      }
      const std::size_t w = attrs.end - attrs.begin;
      Shape s = DropLast(a.shape());
      s.push_back(w);
      Tensor out(s);
      const std::size_t rows = NumElements(DropLast(a.shape()));
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().data() + r * n + attrs.begin, w,
                    out.data().data() + r * w);
      }
      return out;
    }
    case Primitive::kTranspose: {
      const Tensor& a = *in[0];
      if (a.rank() != 2) Conformance(op, "needs a matrix");
      Tensor out(Shape{a.dim(1), a.dim(0)});
      for (std::size_t i = 0; i < a.dim(0); ++i) {
        for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
      }
      return out;
    }
    case Primitive::kReshape: {
      const Tensor& a = *in[0];
      if (NumElements(attrs.shape) != a.size()) {
        Conformance(op, ShapeToString(a.shape()) + " -> " +
                            ShapeToString(attrs.shape));
      }
      return a.Reshaped(attrs.shape);
    }
  }
  Conformance(op, "unknown primitive");
}

}  // namespace

std::string_view PrimitiveName(Primitive op) {
  switch (op) {
    case Primitive::kMatMul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kSubtract: return "subtract";
    case Primitive::kMultiply: return "multiply";
    case Primitive::kExp: return "exp";
    case Primitive::kLog: return "log";
    case Primitive::kTanh: return "tanh";
    case Primitive::kRelu: return "relu";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kSoftplus: return "softplus";
    case Primitive::kNegate: return "negate";
    case Primitive::kSum: return "sum";
    case Primitive::kSumLastAxis: return "sum_last_axis";
    case Primitive::kMean: return "mean";
    case Primitive::kMaxLastAxis: return "max_last_axis";
    case Primitive::kLogSoftmax: return "log_softmax";
    case Primitive::kConcat: return "concat";
    case Primitive::kSlice: return "slice";
    case Primitive::kTranspose: return "transpose";
    case Primitive::kReshape: return "reshape";
  }
  return "unknown";
}

Parameter::Parameter(std::string name, Tensor value)
    : id_(NextParamId()), name_(std::move(name)), value_(std::move(value)) {}

Parameter::Parameter(const Parameter& other)
    : id_(NextParamId()),
      name_(other.name_),
      value_(other.value_),
      trainable_(other.trainable_) {}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    id_ = NextParamId();
    name_ = other.name_;
    value_ = other.value_;
    trainable_ = other.trainable_;
  }
  return *this;
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(index_);
}

bool Var::requires_grad() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->requires_grad(index_);
}

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

Var Tape::Leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return Push(std::move(n));
}

Var Tape::Param(const Parameter& p) {
  if (!p.trainable()) return Constant(p.value());
  if (auto it = param_nodes_.find(p.id()); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.value = p.value();
  n.requires_grad = true;
  n.param = p.id();
  Var v = Push(std::move(n));
  param_nodes_.emplace(p.id(), v.index());
  return v;
}

Var Tape::Apply(Primitive op, std::span<const Var> inputs,
                const PrimitiveAttrs& attrs) {
  if (backward_done_) {
    throw ContractError("tape already consumed by Backward(); build a new one");
  }
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  bool any_grad = false;
  bool all_finite = true;
  for (const Var& v : inputs) {
    if (v.tape() != this) {
      throw ContractError(std::string(PrimitiveName(op)) +
                          ": operand belongs to a different tape");
    }
    in.push_back(&nodes_[v.index()].value);
    any_grad = any_grad || nodes_[v.index()].requires_grad;
    all_finite = all_finite && nodes_[v.index()].value.AllFinite();
  }
  Tensor out = Forward(op, in, attrs);
  if (all_finite && !out.AllFinite()) {
    throw NumericError(std::string(PrimitiveName(op)) +
                       " produced a non-finite value from finite inputs");
  }
  Node n;
  n.value = std::move(out);
  n.requires_grad = any_grad;
  if (any_grad) {
    n.recorded = true;
    n.op = op;
    n.attrs = attrs;
    n.inputs.reserve(inputs.size());
    for (const Var& v : inputs) n.inputs.push_back(v.index());
  }
  return Push(std::move(n));
}

std::size_t Tape::num_records() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [](const Node& n) { return n.recorded; }));
}

Tensor& Tape::GradSlot(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

Tensor Tape::Grad(Var v) const {
  const Node& n = nodes_.at(v.index());
  if (n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size()) {
    return n.grad;
  }
  return Tensor(n.value.shape(), 0.0);
}

// Pushes nodes_[index].grad into the gradients of its inputs.
void Tape::Propagate(std::size_t index) {
  // Copy what we need; GradSlot may touch other nodes but never reallocates.
  const Node& node = nodes_[index];
  const Tensor& g = node.grad;
  const Tensor& out = node.value;
  const auto& ins = node.inputs;
  auto needs = [&](std::size_t k) { return nodes_[ins[k]].requires_grad; };
  auto val = [&](std::size_t k) -> const Tensor& { return nodes_[ins[k]].value; };

  switch (node.op) {
    case Primitive::kMatMul: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (needs(0)) MatMulInto(g, b, GradSlot(ins[0]), false, true, true);
      if (needs(1)) MatMulInto(a, g, GradSlot(ins[1]), true, false, true);
      break;
    }
    case Primitive::kAdd:
    case Primitive::kSubtract:
    case Primitive::kMultiply: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const std::size_t n = g.size(), na = a.size(), nb = b.size();
      const std::size_t period = std::min(na, nb);
      const bool mul = node.op == Primitive::kMultiply;
      const double sign_b = node.op == Primitive::kSubtract ? -1.0 : 1.0;
      const double* pg = g.data().data();
      // `self` receives d(out)/d(self) * g; `other` is the partner operand.
      auto accumulate = [&](Tensor& gs, std::size_t ns, const Tensor& other,
                            std::size_t no, double sign) {
        double* ps = gs.data().data();
        const double* po = other.data().data();
        for (std::size_t base = 0; base < n; base += period) {
          double* dst = ns == n ? ps + base : ps;
          const double* gi = pg + base;
          if (mul) {
            const double* oi = no == n ? po + base : po;
            for (std::size_t j = 0; j < period; ++j) dst[j] += gi[j] * oi[j];
          } else {
            for (std::size_t j = 0; j < period; ++j) dst[j] += sign * gi[j];
          }
        }
      };
      if (needs(0)) accumulate(GradSlot(ins[0]), na, b, nb, 1.0);
      if (needs(1)) accumulate(GradSlot(ins[1]), nb, a, na, sign_b);
      break;
    }
    case Primitive::kExp:
    case Primitive::kLog:
    case Primitive::kTanh:
    case Primitive::kRelu:
    case Primitive::kSigmoid:
    case Primitive::kSoftplus:
    case Primitive::kNegate: {
      if (!needs(0)) break;
      const Tensor& x = val(0);
      Tensor& gx = GradSlot(ins[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0;
        switch (node.op) {
          case Primitive::kExp: d = out[i]; break;
          case Primitive::kLog: d = 1.0 / x[i]; break;
          case Primitive::kTanh: d = 1.0 - out[i] * out[i]; break;
          case Primitive::kRelu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
          case Primitive::kSigmoid: d = out[i] * (1.0 - out[i]); break;
          case Primitive::kSoftplus: d = StableSigmoid(x[i]); break;
          default: d = -1.0; break;
        }
        gx[i] += g[i] * d;
      }
      break;
    }
    case Primitive::kSum:
    case Primitive::kMean: {
      if (!needs(0)) break;
      Tensor& gx = GradSlot(ins[0]);
      double d = g[0];
      if (node.op == Primitive::kMean) d /= static_cast<double>(gx.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += d;
      break;
    }
    case Primitive::kSumLastAxis:
    case Primitive::kMaxLastAxis:
    case Primitive::kLogSoftmax: {
      if (!needs(0)) break;
      const Tensor& x = val(0);
      Tensor& gx = GradSlot(ins[0]);
      const std::size_t n = x.shape().back();
      if (n == 0) break;
      const std::size_t rows = x.size() / n;
      for (std::size_t r = 0; r < rows; ++r) {
        double* gr = gx.data().data() + r * n;
        if (node.op == Primitive::kSumLastAxis) {
          for (std::size_t j = 0; j < n; ++j) gr[j] += g[r];
        } else if (node.op == Primitive::kMaxLastAxis) {
          gr[ArgMax(x.data().data() + r * n, n)] += g[r];
        } else {
          const double* gy = g.data().data() + r * n;
          const double* y = out.data().data() + r * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += gy[j];
          for (std::size_t j = 0; j < n; ++j) gr[j] += gy[j] - std::exp(y[j]) * s;
        }
      }
      break;
    }
    case Primitive::kConcat: {
      const std::size_t total = out.shape().back();
      const std::size_t rows = total ? out.size() / total : 0;
      std::size_t off = 0;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        const std::size_t w = val(k).shape().back();
        if (needs(k)) {
          Tensor& gk = GradSlot(ins[k]);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) {
              gk[r * w + j] += g[r * total + off + j];
            }
          }
        }
        off += w;
      }
      break;
    }
    case Primitive::kSlice: {
      if (!needs(0)) break;
      Tensor& gx = GradSlot(ins[0]);
      const std::size_t n = val(0).shape().back();
      const std::size_t w = node.attrs.end - node.attrs.begin;
      const std::size_t rows = n ? gx.size() / n : 0;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
          gx[r * n + node.attrs.begin + j] += g[r * w + j];
        }
      }
      break;
    }
    case Primitive::kTranspose: {
      if (!needs(0)) break;
      Tensor& gx = GradSlot(ins[0]);
      for (std::size_t i = 0; i < gx.dim(0); ++i) {
        for (std::size_t j = 0; j < gx.dim(1); ++j) gx.at(i, j) += g.at(j, i);
      }
      break;
    }
    case Primitive::kReshape: {
      if (!needs(0)) break;
      Tensor& gx = GradSlot(ins[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
      break;
    }
  }
}

GradientMap Tape::Backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (backward_done_) {
    throw ContractError("Backward() already ran on this tape");
  }
  if (loss.value().size() != 1) {
    throw ContractError("Backward() needs a scalar loss, got shape " +
                        ShapeToString(loss.value().shape()));
  }
  backward_done_ = true;
  if (nodes_[loss.index()].requires_grad) {
    GradSlot(loss.index())[0] = 1.0;
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.recorded || n.grad.size() != n.value.size()) continue;
      Propagate(i);
    }
  }
  GradientMap grads;
  for (const auto& [id, index] : param_nodes_) {
    grads.emplace(id, Grad(Var(this, index)));
  }
  return grads;
}

Var MatMul(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape()->Apply(Primitive::kMatMul, in);
}
Var Add(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape()->Apply(Primitive::kAdd, in);
}
Var Sub(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape()->Apply(Primitive::kSubtract, in);
}
Var Mul(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape()->Apply(Primitive::kMultiply, in);
}

namespace {
Var Unary(Primitive op, Var a, const PrimitiveAttrs& attrs = {}) {
  if (!a.valid()) throw ContractError("use of an unbound Var");
  const Var in[] = {a};
  return a.tape()->Apply(op, in, attrs);
}
}  // namespace

Var Exp(Var a) { return Unary(Primitive::kExp, a); }
Var Log(Var a) { return Unary(Primitive::kLog, a); }
Var Tanh(Var a) { return Unary(Primitive::kTanh, a); }
Var Relu(Var a) { return Unary(Primitive::kRelu, a); }
Var Sigmoid(Var a) { return Unary(Primitive::kSigmoid, a); }
Var Softplus(Var a) { return Unary(Primitive::kSoftplus, a); }
Var Neg(Var a) { return Unary(Primitive::kNegate, a); }
Var Sum(Var a) { return Unary(Primitive::kSum, a); }
Var SumLastAxis(Var a) { return Unary(Primitive::kSumLastAxis, a); }
Var Mean(Var a) { return Unary(Primitive::kMean, a); }
Var MaxLastAxis(Var a) { return Unary(Primitive::kMaxLastAxis, a); }
Var LogSoftmax(Var a) { return Unary(Primitive::kLogSoftmax, a); }
Var Transpose(Var a) { return Unary(Primitive::kTranspose, a); }

Var Concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: needs at least one input");
  return parts[0].tape()->Apply(Primitive::kConcat, parts);
}

Var Concat(std::initializer_list<Var> parts) {
  return Concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Slice(Var a, std::size_t begin, std::size_t end) {
  PrimitiveAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return Unary(Primitive::kSlice, a, attrs);
}

Var Reshape(Var a, Shape shape) {
  PrimitiveAttrs attrs;
  attrs.shape = std::move(shape);
  return Unary(Primitive::kReshape, a, attrs);
}

Var Scale(Var a, double c) { return Mul(a, a.tape()->Scalar(c)); }
Var AddScalar(Var a, double c) { return Add(a, a.tape()->Scalar(c)); }
Var Square(Var a) { return Mul(a, a); }

}  // namespace uno::grad
