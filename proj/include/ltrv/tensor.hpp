#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltrv {

using Shape = std::vector<std::size_t>;

/// Thrown for every contract violation inside the numeric core (shape
/// mismatch, non-finite data, misuse of a tape).
class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;
using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

/// Dense row-major array of 64-bit reals.
///
/// Storage is shared and immutable, so copies are cheap and a Tensor that is
/// not attached to a tape can be handed to other threads freely. A tensor
/// produced by an op whose inputs live on a tape carries the tape handle and
/// its node id; gradients are looked up by that id after `Tape::backward`.
class Tensor {
 public:
  Tensor() = default;
  /// Rejects NaN/Inf and a data length that disagrees with the shape.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return numel() == 0; }

  std::span<const double> data() const;
  const std::vector<double>& values() const;
  std::vector<double> to_vector() const { return values(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  /// Value of a single-element tensor.
  double item() const;

  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }
  bool on_tape() const { return tape_ != nullptr; }
  /// Same values, no tape participation.
  Tensor detached() const;

  /// Same storage, new shape (element count must agree). Does not record.
  Tensor reshaped(Shape shape) const;

 private:
  friend class Tape;
  struct Unchecked {};
  Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;

  friend Tensor make_unchecked(Shape, std::vector<double>);
};

/// Builds a tensor without the finiteness scan; callers guarantee finiteness.
Tensor make_unchecked(Shape shape, std::vector<double> data);

void require_finite(std::span<const double> values, const char* what);

bool same_values(const Tensor& a, const Tensor& b);

}  // namespace ltrv
