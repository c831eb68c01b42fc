#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ltrv/tensor.hpp"

namespace ltrv {

inline constexpr double kLeakySlope = 0.2;

// Every op records itself on the inputs' tape when at least one input is on a
// tape. Outputs are checked for finiteness.

/// [M,K]x[K,N] -> [M,N]; [M,K]x[K] -> [M].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise a+b. `b` may also match a trailing suffix of `a`'s shape, in
/// which case it is broadcast over the leading axes (bias add).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product with the same broadcasting rule as `add`.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);

/// Subgradient at 0 uses the negative-side slope.
Tensor leaky_relu(const Tensor& a, double slope = kLeakySlope);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);

/// Scalar reductions. abs_sum uses sign(0) = 0.
Tensor abs_sum(const Tensor& a);
/// Sum of r^2/(2 delta) for |r| <= delta, |r| - delta/2 beyond; delta > 0.
Tensor huber_sum(const Tensor& a, double delta);
Tensor square_sum(const Tensor& a);
Tensor mean(const Tensor& a);

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// x [N,C,H,W], w [O,C,k,k], bias [O] (may be empty) -> [N,O,Ho,Wo].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvGeometry geom);
/// x [N,C,H,W], w [C,O,k,k], bias [O] (may be empty) -> [N,O,(H-1)s-2p+k, ...].
/// Exact adjoint of conv2d with the same geometry.
Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvGeometry geom);

/// Per-feature running statistics used by `normalize_batch` at inference.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit NormStats(std::size_t features = 0) : mean(features, 0.0), var(features, 1.0) {}
};

/// Per-feature standardization followed by the affine map gamma*x+beta.
/// Features are axis 1 ([N,F] or [N,C,H,W]). In training mode with N > 1
/// batch statistics are used and `stats` is updated; otherwise the running
/// averages in `stats` are used.
Tensor normalize_batch(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormStats& stats,
                       bool training);

struct SoftHistogram {
  std::size_t bins = 16;
  double tau = 0.05;
};

/// KL(p || uniform) where p is the Gaussian-kernel soft histogram of the
/// values of `a` over equal bins in [0,1]. Each value spreads unit mass over
/// the bins; p is the average.
Tensor kl_to_uniform_hist(const Tensor& a, SoftHistogram hist);

/// Central-difference gradient of a scalar function.
template <typename F>
Tensor finite_diff_grad(F&& f, const Tensor& x, double h);

}  // namespace ltrv

#include "ltrv/detail/finite_diff.ipp"
