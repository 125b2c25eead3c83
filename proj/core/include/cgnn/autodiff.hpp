#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "cgnn/tensor.hpp"

namespace cgnn::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records differentiable operations in execution order. Node ids are assigned
// monotonically, so iterating ids in descending order visits every node
// after all of its consumers. A tape belongs to one thread.
class Tape {
 public:
  // Receives the gradient flowing into the node's output and accumulates into
  // its inputs through Tape::Accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  Var Parameter(Tensor value);

  // Records an op output. `fn` is dropped when no input requires a gradient.
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  // Clears previous gradients, seeds d(loss)/d(loss) = 1 and propagates.
  void Backward(const Var& loss);

  const Tensor& Value(std::size_t id) const { return nodes_.at(id).value; }
  bool RequiresGrad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient of the last Backward() target w.r.t. `v`. Zeros if the node did
  // not receive any gradient.
  Tensor Grad(const Var& v) const;
  bool HasGrad(const Var& v) const;

  void Accumulate(const Var& v, const Tensor& grad);
  void AccumulateScaled(const Var& v, const Tensor& grad, double scale);
  // Direct access for kernels that scatter into a gradient buffer.
  Tensor* MutableGrad(const Var& v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // stable addresses across push_back
};

enum class UnaryKind { kSigmoid, kTanh, kLeakyRelu, kExp, kLog, kSquare, kAbs, kNeg };

struct Unary {
  UnaryKind kind;
  double slope = 0.0;  // negative-branch slope for kLeakyRelu

  static Unary Sigmoid() { return {UnaryKind::kSigmoid}; }
  static Unary Tanh() { return {UnaryKind::kTanh}; }
  static Unary LeakyRelu(double slope) { return {UnaryKind::kLeakyRelu, slope}; }
  static Unary Relu() { return {UnaryKind::kLeakyRelu, 0.0}; }
};

// Elementwise
Var ApplyUnary(Unary op, const Var& x);
inline Var Sigmoid(const Var& x) { return ApplyUnary(Unary::Sigmoid(), x); }
inline Var Tanh(const Var& x) { return ApplyUnary(Unary::Tanh(), x); }
inline Var LeakyRelu(const Var& x, double slope) { return ApplyUnary(Unary::LeakyRelu(slope), x); }
inline Var Relu(const Var& x) { return ApplyUnary(Unary::Relu(), x); }
inline Var Exp(const Var& x) { return ApplyUnary({UnaryKind::kExp}, x); }
inline Var Log(const Var& x) { return ApplyUnary({UnaryKind::kLog}, x); }
inline Var Square(const Var& x) { return ApplyUnary({UnaryKind::kSquare}, x); }
inline Var Abs(const Var& x) { return ApplyUnary({UnaryKind::kAbs}, x); }
inline Var Neg(const Var& x) { return ApplyUnary({UnaryKind::kNeg}, x); }

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var AddN(std::span<const Var> terms);
Var Scale(const Var& x, double factor);
Var AddScalar(const Var& x, double value);
// x * s where s is a single-element Var.
Var MulScalar(const Var& x, const Var& s);
// Clamps values into [lo, hi]; gradient passes only where unclamped.
Var Clamp(const Var& x, double lo, double hi);

// The only broadcasting op: x [rows, n] + bias [n] (or [1, n]).
Var AddBias(const Var& x, const Var& bias);
// x [rows, n] scaled row-wise by s [rows, 1].
Var ScaleRows(const Var& x, const Var& s);

// Linear algebra (rank-2)
Var MatMul(const Var& a, const Var& b);
Var Transpose(const Var& x);
Var Inverse(const Var& a);
Var Trace(const Var& a);
// Single entry (r, c) of a matrix as a {1} Var.
Var Element(const Var& x, std::size_t r, std::size_t c);

// Reductions
Var Sum(const Var& x);
Var Mean(const Var& x);
// [rows, n] -> [rows, 1]
Var RowSum(const Var& x);

// Normalization
Var Softmax(const Var& x, std::size_t axis);
Var LayerNorm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// Structure
Var Reshape(const Var& x, Shape shape);
Var ConcatCols(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);
Var SliceCols(const Var& x, std::size_t begin, std::size_t count);
Var SliceRows(const Var& x, std::size_t begin, std::size_t count);
// Repeats a [1, n] row `times` times -> [times, n].
Var TileRows(const Var& row, std::size_t times);
// Selects columns of table [d, m] -> [indices.size(), d] (row i = column indices[i]).
Var GatherCols(const Var& table, std::span<const std::size_t> indices);
// Selects rows of table [m, d] -> [indices.size(), d].
Var GatherRows(const Var& table, std::span<const std::size_t> indices);
// Swaps the two trailing axes of an [outer, a, b] row-major block layout
// stored as a rank-2 [outer * a, b] tensor; result is [outer * b, a].
Var SwapInnerAxes(const Var& x, std::size_t outer, std::size_t a, std::size_t b);

enum class SegmentReduce { kMean, kMax };
// Reduces consecutive row segments of x: segment i spans rows
// [offsets[i], offsets[i+1]). Empty segments produce zero rows.
Var SegmentReduceRows(const Var& x, std::span<const std::size_t> offsets, SegmentReduce kind);

// Elementwise maximum over same-shaped terms (ties resolve to the first).
Var Maximum(std::span<const Var> terms);

}  // namespace cgnn::ad
