#include "cgnn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace cgnn {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ShapeNumel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void ValidateShape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + ShapeToString(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  ValidateShape(shape_);
  data_.assign(ShapeNumel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  ValidateShape(shape_);
  if (ShapeNumel(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeToString(shape_));
  }
}

Tensor Tensor::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::Identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + ShapeToString(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw ShapeError("rows() requires rank <= 2, got " + ShapeToString(shape_));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() == 2) return shape_[1];
  throw ShapeError("cols() requires rank <= 2, got " + ShapeToString(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + ShapeToString(shape_));
  return data_[0];
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (ShapeNumel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " + ShapeToString(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::Transposed() const {
  const std::size_t r = rows(), c = cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = at(i, j);
  return out;
}

void RequireFinite(const Tensor& t, const char* where) {
  if (!t.AllFinite()) throw NumericError(std::string("non-finite value in ") + where);
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

}  // namespace

void MatMulInto(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b,
                Tensor& out, bool accumulate) {
  const std::size_t ar = transpose_a ? a.cols() : a.rows();
  const std::size_t ac = transpose_a ? a.rows() : a.cols();
  const std::size_t br = transpose_b ? b.cols() : b.rows();
  const std::size_t bc = transpose_b ? b.rows() : b.cols();
  if (ac != br) {
    throw ShapeError("matmul inner dimension mismatch: " + ShapeToString(a.shape()) +
                     (transpose_a ? "^T" : "") + " x " + ShapeToString(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  if (out.rows() != ar || out.cols() != bc) {
    throw ShapeError("matmul output has shape " + ShapeToString(out.shape()));
  }
  ConstMap am(a.data().data(), a.rows(), a.cols());
  ConstMap bm(b.data().data(), b.rows(), b.cols());
  MutMap om(out.data().data(), ar, bc);
  if (!accumulate) om.setZero();
  if (transpose_a && transpose_b) {
    om.noalias() += am.transpose() * bm.transpose();
  } else if (transpose_a) {
    om.noalias() += am.transpose() * bm;
  } else if (transpose_b) {
    om.noalias() += am * bm.transpose();
  } else {
    om.noalias() += am * bm;
  }
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects rank-2 operands, got " + ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  MatMulInto(a, false, b, false, out);
  return out;
}

}  // namespace cgnn
