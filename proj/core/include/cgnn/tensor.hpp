#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgnn {

// Error hierarchy shared by every module. Callers catch cgnn::Error for
// anything the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when a forward computation produces (or receives) NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an API call (bad index, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeNumel(const Shape& shape);

// Dense row-major array of doubles. Every dimension is positive; a scalar is
// represented with shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value) { return Tensor({1}, {value}); }
  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Vector(std::initializer_list<double> values);
  static Tensor Identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Row/column counts for rank-2 tensors. A rank-1 tensor of length n is
  // treated as a 1 x n row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const;
  bool AllFinite() const;
  Tensor Reshaped(Shape shape) const;
  Tensor Transposed() const;

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws NumericError naming `where` if any entry is NaN/Inf.
void RequireFinite(const Tensor& t, const char* where);

// Plain kernels shared by the autodiff ops and by non-differentiable code.
// C = A * B (optionally with transposed operands), accumulating when
// `accumulate` is set.
void MatMulInto(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b,
                Tensor& out, bool accumulate = false);
Tensor MatMul(const Tensor& a, const Tensor& b);

}  // namespace cgnn
