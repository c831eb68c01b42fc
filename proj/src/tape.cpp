#include "ltrv/tape.hpp"

#include <string>

namespace ltrv {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Concat: return "concat";
    case OpKind::Reshape: return "reshape";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softplus: return "softplus";
    case OpKind::AbsSum: return "abs_sum";
    case OpKind::HuberSum: return "huber_sum";
    case OpKind::SquareSum: return "square_sum";
    case OpKind::Mean: return "mean";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::TransposeConv2d: return "transpose_conv2d";
    case OpKind::NormalizeBatch: return "normalize_batch";
    case OpKind::KlToUniformHist: return "kl_to_uniform_hist";
  }
  return "unknown";
}

const Tensor& Gradients::operator[](const Tensor& t) const {
  if (t.node() == kNoNode) throw TensorError("gradient requested for a tensor that is not on a tape");
  return at(t.node());
}

const Tensor& Gradients::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw TensorError("no gradient for node " + std::to_string(id));
  return it->second;
}

Tape* common_tape(std::span<const Tensor> inputs) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.tape()) continue;
    if (tape && tape != t.tape()) throw TensorError("op inputs belong to different tapes");
    tape = t.tape();
  }
  return tape;
}

Tensor Tape::leaf(const Tensor& value) {
  if (consumed_) throw TensorError("tape already consumed");
  Tensor out = value.detached();
  out.tape_ = this;
  out.node_ = static_cast<NodeId>(records_.size());
  records_.push_back(Record{OpKind::Leaf, {}, value.shape(), nullptr});
  leaves_.push_back(out.node_);
  return out;
}

Tensor Tape::record(OpKind kind, std::span<const Tensor> inputs, Tensor output, BackwardFn backward) {
  if (consumed_) throw TensorError("tape already consumed");
  Record rec{kind, {}, output.shape(), std::move(backward)};
  rec.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) rec.inputs.push_back(t.tape() == this ? t.node() : kNoNode);
  output.tape_ = this;
  output.node_ = static_cast<NodeId>(records_.size());
  records_.push_back(std::move(rec));
  return output;
}

Gradients Tape::backward(const Tensor& loss) {
  if (consumed_) throw TensorError("tape already consumed");
  if (loss.numel() != 1) throw TensorError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  if (loss.tape() != this) throw TensorError("backward: loss is not on this tape");
  consumed_ = true;

  std::vector<std::vector<double>> grads(records_.size());
  grads[static_cast<std::size_t>(loss.node())] = {1.0};
  visited_ = 0;

  std::vector<std::vector<double>*> slots;
  for (std::size_t idx = static_cast<std::size_t>(loss.node()) + 1; idx-- > 0;) {
    Record& rec = records_[idx];
    if (grads[idx].empty() || rec.kind == OpKind::Leaf) continue;
    ++visited_;
    slots.assign(rec.inputs.size(), nullptr);
    bool any = false;
    for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
      const NodeId in = rec.inputs[i];
      if (in == kNoNode) continue;
      auto& buf = grads[static_cast<std::size_t>(in)];
      if (buf.empty()) buf.assign(shape_numel(records_[static_cast<std::size_t>(in)].shape), 0.0);
      slots[i] = &buf;
      any = true;
    }
    if (any) rec.backward(grads[idx], slots);
    // Free intermediate buffers and saved activations as soon as they are used.
    grads[idx].clear();
    grads[idx].shrink_to_fit();
    rec.backward = nullptr;
  }

  std::unordered_map<NodeId, Tensor> out;
  for (NodeId id : leaves_) {
    auto& buf = grads[static_cast<std::size_t>(id)];
    const Shape& shape = records_[static_cast<std::size_t>(id)].shape;
    if (buf.empty()) buf.assign(shape_numel(shape), 0.0);
    require_finite(buf, "backward");
    out.emplace(id, make_unchecked(shape, std::move(buf)));
  }
  return Gradients(std::move(out));
}

}  // namespace ltrv
