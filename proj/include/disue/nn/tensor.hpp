#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disue/error.hpp"

namespace disue::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array of doubles. Rank 0 is a scalar, rank 2 a [rows, cols]
// matrix; nothing in the engine needs more than rank 2.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw InvalidInput("tensor shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  static Tensor row(std::vector<double> data) {
    const std::size_t n = data.size();
    return Tensor({1, n}, std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Rank-2 view; rank-1 tensors read as a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 1); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const {
    if (data_.size() != 1) throw InvalidInput("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace disue::nn
