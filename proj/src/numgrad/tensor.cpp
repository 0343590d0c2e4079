#include "fsu/numgrad/tensor.hpp"

#include <cmath>

namespace fsu::numgrad {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor", shape_, {data_.size(), 1});
  }
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor(rows, cols, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item", shape_, {1, 1});
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const Tensor::Shape& s) {
  return "(" + std::to_string(s[0]) + "x" + std::to_string(s[1]) + ")";
}

ShapeError::ShapeError(const std::string& primitive, const Tensor::Shape& a,
                       const Tensor::Shape& b)
    : Error(ErrorKind::kData, "shape mismatch in " + primitive + ": " +
                                  shape_str(a) + " vs " + shape_str(b)) {}

}  // namespace fsu::numgrad
