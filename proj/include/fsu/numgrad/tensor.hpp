#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "fsu/error.hpp"

namespace fsu::numgrad {

// Dense row-major matrix of doubles. Every value in the core is rank 2;
// vectors are 1xn or nx1 and scalars are 1x1.
class Tensor {
 public:
  using Shape = std::array<std::size_t, 2>;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  std::size_t rows() const noexcept { return shape_[0]; }
  std::size_t cols() const noexcept { return shape_[1]; }
  std::size_t size() const noexcept { return data_.size(); }
  Shape shape() const noexcept { return shape_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * shape_[1], shape_[1]);
  }
  std::span<double> row_span(std::size_t r) {
    return std::span<double>(data_).subspan(r * shape_[1], shape_[1]);
  }

  // Value of a 1x1 tensor.
  double item() const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{0, 0};
  std::vector<double> data_;
};

std::string shape_str(const Tensor::Shape& s);

// Raised when a primitive receives operands of incompatible shapes.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& primitive, const Tensor::Shape& a,
             const Tensor::Shape& b);
};

}  // namespace fsu::numgrad
