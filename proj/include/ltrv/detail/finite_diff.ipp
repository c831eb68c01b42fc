#pragma once

#include <cmath>
#include <string>

namespace ltrv {

template <typename F>
Tensor finite_diff_grad(F&& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw TensorError("finite_diff_grad: step must be positive");
  std::vector<double> probe = x.to_vector();
  std::vector<double> grad(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = static_cast<double>(f(Tensor(x.shape(), probe)));
    probe[i] = saved - h;
    const double down = static_cast<double>(f(Tensor(x.shape(), probe)));
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw TensorError("finite_diff_grad: non-finite value at probe " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

}  // namespace ltrv
