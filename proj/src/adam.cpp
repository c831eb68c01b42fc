#include "ltrv/adam.hpp"

#include <cmath>
#include <string>

namespace ltrv {

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw TensorError("adam_step: " + std::to_string(params.size()) + " params but " +
                      std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw TensorError("adam_step: state belongs to a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || state.m[i].size() != params[i].numel()) {
      throw TensorError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                        shape_string(params[i].shape()) + " vs gradient " + shape_string(grads[i].shape()));
    }
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> next = params[i].to_vector();
    const auto g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < next.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      next[j] -= c.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
    }
    params[i] = Tensor(params[i].shape(), std::move(next));
  }
}

}  // namespace ltrv
