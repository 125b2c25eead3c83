#include "cgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cgnn::ad {

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().Value(id_); }

bool Var::requires_grad() const { return tape().RequiresGrad(id_); }

Var Tape::Constant(Tensor value) {
  RequireFinite(value, "constant");
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Parameter(Tensor value) {
  RequireFinite(value, "parameter");
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool any = false;
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw ContractError("op inputs live on a different tape");
    any = any || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, any, false, any ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

void Tape::Backward(const Var& loss) {
  if (loss.tape_ != this) throw ContractError("loss is not on this tape");
  const Tensor& lv = nodes_[loss.id_].value;
  if (lv.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + ShapeToString(lv.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss.id_];
  if (!root.requires_grad) return;
  root.grad = Tensor(lv.shape(), 1.0);
  root.has_grad = true;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Tensor Tape::Grad(const Var& v) const {
  const Node& n = nodes_.at(v.id_);
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

bool Tape::HasGrad(const Var& v) const { return nodes_.at(v.id_).has_grad; }

Tensor* Tape::MutableGrad(const Var& v) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::Accumulate(const Var& v, const Tensor& grad) { AccumulateScaled(v, grad, 1.0); }

void Tape::AccumulateScaled(const Var& v, const Tensor& grad, double scale) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) return;
  if (grad.size() != n.value.size()) {
    throw ShapeError("gradient shape " + ShapeToString(grad.shape()) + " does not match node " +
                     ShapeToString(n.value.shape()));
  }
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  auto dst = n.grad.data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

namespace {

Tape& SameTape(const Var& a, const Var& b) {
  Tape& t = a.tape();
  if (&t != &b.tape()) throw ContractError("operands live on different tapes");
  return t;
}

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

void RequireRank2(const Var& x, const char* op) {
  if (x.value().rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " + ShapeToString(x.shape()));
  }
}

Var Finish(Tape& tape, Tensor value, std::span<const Var> inputs, Tape::BackwardFn fn,
           const char* op) {
  RequireFinite(value, op);
  return tape.Record(std::move(value), inputs, std::move(fn));
}

double SigmoidScalar(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var ApplyUnary(Unary op, const Var& x) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  RequireFinite(xv, "unary input");
  Tensor out(xv.shape());
  auto o = out.data();
  auto in = xv.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    switch (op.kind) {
      case UnaryKind::kSigmoid: o[i] = SigmoidScalar(v); break;
      case UnaryKind::kTanh: o[i] = std::tanh(v); break;
      case UnaryKind::kLeakyRelu: o[i] = v >= 0 ? v : op.slope * v; break;
      case UnaryKind::kExp: o[i] = std::exp(v); break;
      case UnaryKind::kLog:
        if (v <= 0) throw NumericError("log of non-positive value");
        o[i] = std::log(v);
        break;
      case UnaryKind::kSquare: o[i] = v * v; break;
      case UnaryKind::kAbs: o[i] = std::abs(v); break;
      case UnaryKind::kNeg: o[i] = -v; break;
    }
  }
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, op](Tape& t, const Tensor& g) {
        Tensor* gx = t.MutableGrad(x);
        if (!gx) return;
        auto in = x.value().data();
        auto gd = g.data();
        auto dst = gx->data();
        for (std::size_t i = 0; i < in.size(); ++i) {
          const double v = in[i];
          double d = 0.0;
          switch (op.kind) {
            case UnaryKind::kSigmoid: {
              const double s = SigmoidScalar(v);
              d = s * (1.0 - s);
              break;
            }
            case UnaryKind::kTanh: {
              const double th = std::tanh(v);
              d = 1.0 - th * th;
              break;
            }
            case UnaryKind::kLeakyRelu: d = v >= 0 ? 1.0 : op.slope; break;
            case UnaryKind::kExp: d = std::exp(v); break;
            case UnaryKind::kLog: d = 1.0 / v; break;
            case UnaryKind::kSquare: d = 2.0 * v; break;
            case UnaryKind::kAbs: d = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); break;
            case UnaryKind::kNeg: d = -1.0; break;
          }
          dst[i] += gd[i] * d;
        }
      },
      "unary op");
}

Var Add(const Var& a, const Var& b) {
  Tape& tape = SameTape(a, b);
  RequireSameShape(a, b, "add");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  const Var inputs[] = {a, b};
  return Finish(
      tape, std::move(out), inputs,
      [a, b](Tape& t, const Tensor& g) {
        t.Accumulate(a, g);
        t.Accumulate(b, g);
      },
      "add");
}

Var Sub(const Var& a, const Var& b) {
  Tape& tape = SameTape(a, b);
  RequireSameShape(a, b, "sub");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const Var inputs[] = {a, b};
  return Finish(
      tape, std::move(out), inputs,
      [a, b](Tape& t, const Tensor& g) {
        t.Accumulate(a, g);
        t.AccumulateScaled(b, g, -1.0);
      },
      "sub");
}

Var Mul(const Var& a, const Var& b) {
  Tape& tape = SameTape(a, b);
  RequireSameShape(a, b, "mul");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  const Var inputs[] = {a, b};
  return Finish(
      tape, std::move(out), inputs,
      [a, b](Tape& t, const Tensor& g) {
        auto gd = g.data();
        if (Tensor* ga = t.MutableGrad(a)) {
          auto bv = b.value().data();
          auto dst = ga->data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gd[i] * bv[i];
        }
        if (Tensor* gb = t.MutableGrad(b)) {
          auto av = a.value().data();
          auto dst = gb->data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gd[i] * av[i];
        }
      },
      "mul");
}

Var AddN(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("AddN of zero terms");
  Tape& tape = terms[0].tape();
  Tensor out = terms[0].value();
  auto o = out.data();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    RequireSameShape(terms[0], terms[k], "add_n");
    auto v = terms[k].value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += v[i];
  }
  std::vector<Var> ins(terms.begin(), terms.end());
  return Finish(
      tape, std::move(out), terms,
      [ins](Tape& t, const Tensor& g) {
        for (const auto& v : ins) t.Accumulate(v, g);
      },
      "add_n");
}

Var Scale(const Var& x, double factor) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (auto& v : out.values()) v *= factor;
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, factor](Tape& t, const Tensor& g) { t.AccumulateScaled(x, g, factor); }, "scale");
}

Var AddScalar(const Var& x, double value) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (auto& v : out.values()) v += value;
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs, [x](Tape& t, const Tensor& g) { t.Accumulate(x, g); },
      "add_scalar");
}

Var MulScalar(const Var& x, const Var& s) {
  Tape& tape = SameTape(x, s);
  if (s.value().size() != 1) throw ShapeError("MulScalar expects a single-element scale");
  const double sv = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.values()) v *= sv;
  const Var inputs[] = {x, s};
  return Finish(
      tape, std::move(out), inputs,
      [x, s](Tape& t, const Tensor& g) {
        const double sv = s.value()[0];
        t.AccumulateScaled(x, g, sv);
        if (Tensor* gs = t.MutableGrad(s)) {
          double acc = 0.0;
          auto xv = x.value().data();
          auto gd = g.data();
          for (std::size_t i = 0; i < gd.size(); ++i) acc += gd[i] * xv[i];
          (*gs)[0] += acc;
        }
      },
      "mul_scalar");
}

Var Clamp(const Var& x, double lo, double hi) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::clamp(v, lo, hi);
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, lo, hi](Tape& t, const Tensor& g) {
        Tensor* gx = t.MutableGrad(x);
        if (!gx) return;
        auto xv = x.value().data();
        auto gd = g.data();
        auto dst = gx->data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
          if (xv[i] >= lo && xv[i] <= hi) dst[i] += gd[i];
        }
      },
      "clamp");
}

Var AddBias(const Var& x, const Var& bias) {
  Tape& tape = SameTape(x, bias);
  RequireRank2(x, "add_bias");
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.value().size() != c || bias.value().rows() != 1) {
    throw ShapeError("add_bias: bias " + ShapeToString(bias.shape()) + " does not match " +
                     ShapeToString(x.shape()));
  }
  Tensor out = x.value();
  auto bv = bias.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += bv[j];
  const Var inputs[] = {x, bias};
  return Finish(
      tape, std::move(out), inputs,
      [x, bias, r, c](Tape& t, const Tensor& g) {
        t.Accumulate(x, g);
        if (Tensor* gb = t.MutableGrad(bias)) {
          auto dst = gb->data();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dst[j] += g.at(i, j);
        }
      },
      "add_bias");
}

Var ScaleRows(const Var& x, const Var& s) {
  Tape& tape = SameTape(x, s);
  RequireRank2(x, "scale_rows");
  const std::size_t r = x.rows(), c = x.cols();
  if (s.value().size() != r) {
    throw ShapeError("scale_rows: scale " + ShapeToString(s.shape()) + " vs rows of " +
                     ShapeToString(x.shape()));
  }
  Tensor out = x.value();
  auto sv = s.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= sv[i];
  const Var inputs[] = {x, s};
  return Finish(
      tape, std::move(out), inputs,
      [x, s, r, c](Tape& t, const Tensor& g) {
        auto sv = s.value().data();
        if (Tensor* gx = t.MutableGrad(x)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx->at(i, j) += g.at(i, j) * sv[i];
        }
        if (Tensor* gs = t.MutableGrad(s)) {
          const Tensor& xv = x.value();
          auto dst = gs->data();
          for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += g.at(i, j) * xv.at(i, j);
            dst[i] += acc;
          }
        }
      },
      "scale_rows");
}

Var MatMul(const Var& a, const Var& b) {
  Tape& tape = SameTape(a, b);
  RequireRank2(a, "matmul");
  RequireRank2(b, "matmul");
  Tensor out = cgnn::MatMul(a.value(), b.value());
  const Var inputs[] = {a, b};
  return Finish(
      tape, std::move(out), inputs,
      [a, b](Tape& t, const Tensor& g) {
        if (Tensor* ga = t.MutableGrad(a)) MatMulInto(g, false, b.value(), true, *ga, true);
        if (Tensor* gb = t.MutableGrad(b)) MatMulInto(a.value(), true, g, false, *gb, true);
      },
      "matmul");
}

Var Transpose(const Var& x) {
  Tape& tape = x.tape();
  RequireRank2(x, "transpose");
  Tensor out = x.value().Transposed();
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x](Tape& t, const Tensor& g) { t.Accumulate(x, g.Transposed()); }, "transpose");
}

namespace {

// Gauss-Jordan inverse with partial pivoting. Returns false when a pivot falls
// below `tol` relative to the matrix scale.
bool InvertMatrix(const Tensor& a, Tensor& inv, double tol = 1e-12) {
  const std::size_t n = a.rows();
  Tensor m = a;
  inv = Tensor::Identity(n);
  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m.at(r, col)) > std::abs(m.at(piv, col))) piv = r;
    if (std::abs(m.at(piv, col)) <= tol * scale) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(m.at(piv, c), m.at(col, c));
        std::swap(inv.at(piv, c), inv.at(col, c));
      }
    }
    const double p = m.at(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      m.at(col, c) /= p;
      inv.at(col, c) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        m.at(r, c) -= f * m.at(col, c);
        inv.at(r, c) -= f * inv.at(col, c);
      }
    }
  }
  return true;
}

}  // namespace

Var Inverse(const Var& a) {
  Tape& tape = a.tape();
  RequireRank2(a, "inverse");
  if (a.rows() != a.cols()) throw ShapeError("inverse of non-square " + ShapeToString(a.shape()));
  Tensor inv;
  if (!InvertMatrix(a.value(), inv)) throw NumericError("inverse: matrix is numerically singular");
  const Var inputs[] = {a};
  Tensor inv_copy = inv;
  // d(A^-1) = -A^-1 dA A^-1  =>  grad_A = -A^-T G A^-T
  return Finish(
      tape, std::move(inv), inputs,
      [a, inv_value = std::move(inv_copy)](Tape& t, const Tensor& g) {
        Tensor tmp(inv_value.shape());
        MatMulInto(inv_value, true, g, false, tmp);
        Tensor ga(inv_value.shape());
        MatMulInto(tmp, false, inv_value, true, ga);
        t.AccumulateScaled(a, ga, -1.0);
      },
      "inverse");
}

Var Trace(const Var& a) {
  Tape& tape = a.tape();
  RequireRank2(a, "trace");
  if (a.rows() != a.cols()) throw ShapeError("trace of non-square " + ShapeToString(a.shape()));
  double tr = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) tr += a.value().at(i, i);
  const Var inputs[] = {a};
  return Finish(
      tape, Tensor::Scalar(tr), inputs,
      [a](Tape& t, const Tensor& g) {
        if (Tensor* ga = t.MutableGrad(a)) {
          for (std::size_t i = 0; i < ga->rows(); ++i) ga->at(i, i) += g[0];
        }
      },
      "trace");
}

Var Element(const Var& x, std::size_t r, std::size_t c) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  if (r >= xv.rows() || c >= xv.cols()) throw ContractError("element index out of range");
  const Var inputs[] = {x};
  return Finish(
      tape, Tensor::Scalar(xv.at(r, c)), inputs,
      [x, r, c](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) gx->at(r, c) += g[0];
      },
      "element");
}

Var Sum(const Var& x) {
  Tape& tape = x.tape();
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const Var inputs[] = {x};
  return Finish(
      tape, Tensor::Scalar(s), inputs,
      [x](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          for (auto& v : gx->values()) v += g[0];
        }
      },
      "sum");
}

Var Mean(const Var& x) { return Scale(Sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var RowSum(const Var& x) {
  Tape& tape = x.tape();
  RequireRank2(x, "row_sum");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x.value().at(i, j);
    out[i] = s;
  }
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, r, c](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx->at(i, j) += g[i];
        }
      },
      "row_sum");
}

Var Softmax(const Var& x, std::size_t axis) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  RequireFinite(xv, "softmax input");
  if (xv.rank() > 2 || axis >= xv.rank()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " +
                     ShapeToString(xv.shape()));
  }
  // Normalize to a [rows, cols] view where the reduction runs along `axis`.
  const std::size_t r = xv.rows(), c = xv.cols();
  const bool along_cols = (xv.rank() == 1) || axis == 1;
  const std::size_t groups = along_cols ? r : c;
  const std::size_t len = along_cols ? c : r;
  auto idx = [=](std::size_t gi, std::size_t k) { return along_cols ? gi * c + k : k * c + gi; };
  Tensor out(xv.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[idx(gi, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(xv[idx(gi, k)] - mx);
      out[idx(gi, k)] = e;
      z += e;
    }
    for (std::size_t k = 0; k < len; ++k) out[idx(gi, k)] /= z;
  }
  const Var inputs[] = {x};
  Tensor y_val = out;
  return Finish(
      tape, std::move(out), inputs,
      [x, groups, len, idx, y_val = std::move(y_val)](Tape& t, const Tensor& g) {
        Tensor* gx = t.MutableGrad(x);
        if (!gx) return;
        for (std::size_t gi = 0; gi < groups; ++gi) {
          double dot = 0.0;
          for (std::size_t k = 0; k < len; ++k) dot += g[idx(gi, k)] * y_val[idx(gi, k)];
          for (std::size_t k = 0; k < len; ++k) {
            const std::size_t p = idx(gi, k);
            (*gx)[p] += y_val[p] * (g[p] - dot);
          }
        }
      },
      "softmax");
}

Var LayerNorm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape& tape = SameTape(x, gain);
  SameTape(x, bias);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.value().size() != c || bias.value().size() != c) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(c) + " entries");
  }
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv.at(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) xhat.at(i, j) = (xv.at(i, j) - mean) * inv_std[i];
  }
  Tensor out(xv.shape());
  auto gv = gain.value().data();
  auto bv = bias.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = xhat.at(i, j) * gv[j] + bv[j];
  const Var inputs[] = {x, gain, bias};
  return Finish(
      tape, std::move(out), inputs,
      [x, gain, bias, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor& g) {
        auto gv = gain.value().data();
        if (Tensor* gg = t.MutableGrad(gain)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gg)[j] += g.at(i, j) * xhat.at(i, j);
        }
        if (Tensor* gb = t.MutableGrad(bias)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gb)[j] += g.at(i, j);
        }
        if (Tensor* gx = t.MutableGrad(x)) {
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g.at(i, j) * gv[j];
              sum_d += d;
              sum_dx += d * xhat.at(i, j);
            }
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g.at(i, j) * gv[j];
              gx->at(i, j) += inv_std[i] * (d - inv_c * sum_d - xhat.at(i, j) * inv_c * sum_dx);
            }
          }
        }
      },
      "layer_norm");
}

Var Reshape(const Var& x, Shape shape) {
  Tape& tape = x.tape();
  Tensor out = x.value().Reshaped(std::move(shape));
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          auto dst = gx->data();
          auto src = g.data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      },
      "reshape");
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero parts");
  Tape& tape = parts[0].tape();
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    RequireRank2(p, "concat_cols");
    if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch");
    total += p.cols();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
    off += pv.cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return Finish(
      tape, std::move(out), parts,
      [ins, r](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (const auto& p : ins) {
          const std::size_t pc = p.cols();
          if (Tensor* gp = t.MutableGrad(p)) {
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < pc; ++j) gp->at(i, j) += g.at(i, off + j);
          }
          off += pc;
        }
      },
      "concat_cols");
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero parts");
  Tape& tape = parts[0].tape();
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    RequireRank2(p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
    total += p.rows();
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const auto& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  std::vector<Var> ins(parts.begin(), parts.end());
  return Finish(
      tape, Tensor({total, c}, std::move(data)), parts,
      [ins](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (const auto& p : ins) {
          const std::size_t n = p.value().size();
          if (Tensor* gp = t.MutableGrad(p)) {
            for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
          }
          off += n;
        }
      },
      "concat_rows");
}

Var SliceCols(const Var& x, std::size_t begin, std::size_t count) {
  Tape& tape = x.tape();
  RequireRank2(x, "slice_cols");
  const std::size_t r = x.rows(), c = x.cols();
  if (count == 0 || begin + count > c) throw ShapeError("slice_cols out of range");
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = x.value().at(i, begin + j);
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, begin, count, r](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) gx->at(i, begin + j) += g.at(i, j);
        }
      },
      "slice_cols");
}

Var SliceRows(const Var& x, std::size_t begin, std::size_t count) {
  Tape& tape = x.tape();
  RequireRank2(x, "slice_rows");
  const std::size_t r = x.rows(), c = x.cols();
  if (count == 0 || begin + count > r) throw ShapeError("slice_rows out of range");
  auto src = x.value().data();
  std::vector<double> data(src.begin() + begin * c, src.begin() + (begin + count) * c);
  const Var inputs[] = {x};
  return Finish(
      tape, Tensor({count, c}, std::move(data)), inputs,
      [x, begin, c](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          auto dst = gx->data();
          for (std::size_t i = 0; i < g.size(); ++i) dst[begin * c + i] += g[i];
        }
      },
      "slice_rows");
}

Var TileRows(const Var& row, std::size_t times) {
  Tape& tape = row.tape();
  if (row.rows() != 1) throw ShapeError("tile_rows expects a single row");
  const std::size_t c = row.cols();
  Tensor out({times, c});
  for (std::size_t i = 0; i < times; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = row.value()[j];
  const Var inputs[] = {row};
  return Finish(
      tape, std::move(out), inputs,
      [row, times, c](Tape& t, const Tensor& g) {
        if (Tensor* gr = t.MutableGrad(row)) {
          for (std::size_t i = 0; i < times; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gr)[j] += g.at(i, j);
        }
      },
      "tile_rows");
}

Var GatherCols(const Var& table, std::span<const std::size_t> indices) {
  Tape& tape = table.tape();
  RequireRank2(table, "gather_cols");
  const std::size_t d = table.rows(), m = table.cols();
  if (indices.empty()) throw ContractError("gather_cols with no indices");
  Tensor out({indices.size(), d});
  const Tensor& tv = table.value();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m) {
      throw ContractError("embedding index " + std::to_string(indices[i]) + " out of range " +
                          std::to_string(m));
    }
    for (std::size_t k = 0; k < d; ++k) out.at(i, k) = tv.at(k, indices[i]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const Var inputs[] = {table};
  return Finish(
      tape, std::move(out), inputs,
      [table, idx = std::move(idx), d](Tape& t, const Tensor& g) {
        if (Tensor* gt = t.MutableGrad(table)) {
          for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t k = 0; k < d; ++k) gt->at(k, idx[i]) += g.at(i, k);
        }
      },
      "gather_cols");
}

Var GatherRows(const Var& table, std::span<const std::size_t> indices) {
  Tape& tape = table.tape();
  RequireRank2(table, "gather_rows");
  const std::size_t m = table.rows(), d = table.cols();
  if (indices.empty()) throw ContractError("gather_rows with no indices");
  Tensor out({indices.size(), d});
  const Tensor& tv = table.value();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m) {
      throw ContractError("row index " + std::to_string(indices[i]) + " out of range " +
                          std::to_string(m));
    }
    std::copy_n(tv.data().begin() + indices[i] * d, d, out.data().begin() + i * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const Var inputs[] = {table};
  return Finish(
      tape, std::move(out), inputs,
      [table, idx = std::move(idx), d](Tape& t, const Tensor& g) {
        if (Tensor* gt = t.MutableGrad(table)) {
          auto dst = gt->data();
          for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t k = 0; k < d; ++k) dst[idx[i] * d + k] += g[i * d + k];
        }
      },
      "gather_rows");
}

Var SwapInnerAxes(const Var& x, std::size_t outer, std::size_t a, std::size_t b) {
  Tape& tape = x.tape();
  if (x.value().size() != outer * a * b) throw ShapeError("swap_inner_axes: size mismatch");
  Tensor out({outer * b, a});
  const auto src = x.value().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j) out[(o * b + j) * a + i] = src[(o * a + i) * b + j];
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, outer, a, b](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.MutableGrad(x)) {
          auto dst = gx->data();
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < a; ++i)
              for (std::size_t j = 0; j < b; ++j) dst[(o * a + i) * b + j] += g[(o * b + j) * a + i];
        }
      },
      "swap_inner_axes");
}

Var SegmentReduceRows(const Var& x, std::span<const std::size_t> offsets, SegmentReduce kind) {
  Tape& tape = x.tape();
  RequireRank2(x, "segment_reduce");
  if (offsets.size() < 2) throw ContractError("segment_reduce needs at least one segment");
  const std::size_t segs = offsets.size() - 1, c = x.cols();
  if (offsets.back() != x.rows()) throw ShapeError("segment offsets do not cover input rows");
  const Tensor& xv = x.value();
  Tensor out({segs, c});
  std::vector<std::size_t> argmax(kind == SegmentReduce::kMax ? segs * c : 0);
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi < lo) throw ContractError("segment offsets must be nondecreasing");
    if (hi == lo) continue;
    for (std::size_t j = 0; j < c; ++j) {
      if (kind == SegmentReduce::kMean) {
        double acc = 0.0;
        for (std::size_t r = lo; r < hi; ++r) acc += xv.at(r, j);
        out.at(s, j) = acc / static_cast<double>(hi - lo);
      } else {
        std::size_t best = lo;
        for (std::size_t r = lo + 1; r < hi; ++r)
          if (xv.at(r, j) > xv.at(best, j)) best = r;
        out.at(s, j) = xv.at(best, j);
        argmax[s * c + j] = best;
      }
    }
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  const Var inputs[] = {x};
  return Finish(
      tape, std::move(out), inputs,
      [x, offs = std::move(offs), argmax = std::move(argmax), kind, segs, c](Tape& t,
                                                                            const Tensor& g) {
        Tensor* gx = t.MutableGrad(x);
        if (!gx) return;
        for (std::size_t s = 0; s < segs; ++s) {
          const std::size_t lo = offs[s], hi = offs[s + 1];
          if (hi == lo) continue;
          for (std::size_t j = 0; j < c; ++j) {
            if (kind == SegmentReduce::kMean) {
              const double share = g.at(s, j) / static_cast<double>(hi - lo);
              for (std::size_t r = lo; r < hi; ++r) gx->at(r, j) += share;
            } else {
              gx->at(argmax[s * c + j], j) += g.at(s, j);
            }
          }
        }
      },
      "segment_reduce");
}

Var Maximum(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("maximum of zero terms");
  Tape& tape = terms[0].tape();
  const std::size_t n = terms[0].value().size();
  for (const auto& t : terms) RequireSameShape(terms[0], t, "maximum");
  Tensor out = terms[0].value();
  std::vector<std::size_t> which(n, 0);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    auto v = terms[k].value().data();
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        which[i] = k;
      }
    }
  }
  std::vector<Var> ins(terms.begin(), terms.end());
  return Finish(
      tape, std::move(out), terms,
      [ins, which = std::move(which)](Tape& t, const Tensor& g) {
        for (std::size_t k = 0; k < ins.size(); ++k) {
          Tensor* gk = t.MutableGrad(ins[k]);
          if (!gk) continue;
          for (std::size_t i = 0; i < which.size(); ++i)
            if (which[i] == k) (*gk)[i] += g[i];
        }
      },
      "maximum");
}

}  // namespace cgnn::ad
