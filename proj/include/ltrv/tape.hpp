#pragma once

#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ltrv/tensor.hpp"

namespace ltrv {

enum class OpKind {
  Leaf,
  Matmul,
  Add,
  Sub,
  Mul,
  Scale,
  Concat,
  Reshape,
  LeakyRelu,
  Tanh,
  Softplus,
  AbsSum,
  HuberSum,
  SquareSum,
  Mean,
  Conv2d,
  TransposeConv2d,
  NormalizeBatch,
  KlToUniformHist,
};

std::string_view op_name(OpKind kind);

/// Gradient of the loss w.r.t. every node that was asked for.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::unordered_map<NodeId, Tensor> grads) : grads_(std::move(grads)) {}

  /// Gradient for a tensor registered as a leaf (or any recorded node).
  const Tensor& operator[](const Tensor& t) const;
  const Tensor& at(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Ordered record of differentiable operations.
///
/// Every record's inputs precede it, so a single reverse sweep is a valid
/// topological traversal. A tape supports exactly one backward pass.
class Tape {
 public:
  /// grad_in[i] is null when input i does not need a gradient; otherwise the
  /// callback accumulates into it.
  using BackwardFn =
      std::function<void(std::span<const double> grad_out, std::span<std::vector<double>*> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a value as a differentiable leaf of this tape.
  Tensor leaf(const Tensor& value);

  /// Appends an op record; `output` gets the new node id. Inputs not on this
  /// tape are treated as constants.
  Tensor record(OpKind kind, std::span<const Tensor> inputs, Tensor output, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Leaves that the loss does not reach
  /// receive zero gradients.
  Gradients backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }
  /// Number of records visited by the last backward sweep.
  std::size_t visited() const { return visited_; }

 private:
  struct Record {
    OpKind kind;
    std::vector<NodeId> inputs;
    Shape shape;
    BackwardFn backward;
  };

  std::vector<Record> records_;
  std::vector<NodeId> leaves_;
  bool consumed_ = false;
  std::size_t visited_ = 0;
};

/// Common tape of the inputs (null when none participates). Throws when the
/// inputs belong to different tapes.
Tape* common_tape(std::span<const Tensor> inputs);

}  // namespace ltrv
