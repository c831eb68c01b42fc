#include "ltrv/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ltrv {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw TensorError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw TensorError("tensor extents must be positive, got " + shape_string(shape_));
  }
  if (shape_numel(shape_) != data.size()) {
    throw TensorError("shape " + shape_string(shape_) + " does not match " +
                      std::to_string(data.size()) + " values");
  }
  require_finite(data, "tensor");
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor::Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor make_unchecked(Shape shape, std::vector<double> data) {
  return Tensor(Tensor::Unchecked{}, std::move(shape),
                std::make_shared<const std::vector<double>>(std::move(data)));
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw TensorError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

std::span<const double> Tensor::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

const std::vector<double>& Tensor::values() const {
  static const std::vector<double> kEmpty;
  return data_ ? *data_ : kEmpty;
}

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item() on tensor of shape " + shape_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detached() const { return Tensor(Unchecked{}, shape_, data_); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw TensorError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(Unchecked{}, std::move(shape), data_);
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.values() == b.values();
}

}  // namespace ltrv
