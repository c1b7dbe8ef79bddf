#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvi {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Dense n-dimensional array of doubles, row-major. Scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size())
      throw ShapeError("tensor: shape/data size mismatch");
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  // Matrix views: rank-1 tensors count as a single row.
  std::size_t rows() const {
    if (shape_.empty()) return 1;
    return rank() >= 2 ? shape_[0] : 1;
  }
  std::size_t cols() const {
    if (shape_.empty()) return 1;
    return rank() >= 2 ? shape_[1] : shape_[0];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool is_scalar() const { return size() == 1; }

  double value() const {
    if (!is_scalar()) throw ShapeError("tensor: value() on non-scalar");
    return data_[0];
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace dvi
