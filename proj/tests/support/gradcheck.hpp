#pragma once

// Randomized autodiff-vs-finite-difference harness shared by the unit tests
// and the acceptance suite. Every case builds a scalar loss from one op kind
// and compares the tape gradient of each input with central differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ltrv/ops.hpp"
#include "ltrv/tape.hpp"

namespace ltrv::testing {

inline double relative_error(const Tensor& a, const Tensor& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < 1e-8) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            double avoid_zero = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    do {
      x = u(rng);
    } while (std::abs(x) <= avoid_zero);
  }
  return Tensor(std::move(shape), std::move(v));
}

/// A differentiable scalar function of a list of inputs.
using MultiFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Largest relative error over all inputs of `fn` at `inputs`.
inline double check_case(const MultiFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  const Gradients grads = tape.backward(fn(leaves));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto partial = [&](const Tensor& probe) {
      std::vector<Tensor> args = inputs;
      args[k] = probe;
      return fn(args).item();
    };
    const Tensor fd = finite_diff_grad(partial, inputs[k], h);
    worst = std::max(worst, relative_error(grads[leaves[k]], fd));
  }
  return worst;
}

// Smooth scalarization: sum of outputs weighted by a fixed random tensor.
inline Tensor weighted_sum(const Tensor& out, const Tensor& weights) {
  return scale(mean(mul(out, weights)), static_cast<double>(out.numel()));
}

struct OpCase {
  std::string name;
  std::function<double(std::mt19937_64&)> run;  // returns the max relative error of one random case
};

inline std::vector<OpCase> all_op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
                     Tensor w = random_tensor({3, 2}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(matmul(in[0], in[1]), w); }, {a, b});
                   }});
  cases.push_back({"add", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
                     Tensor w = random_tensor({3, 4}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(add(in[0], in[1]), w); }, {a, b});
                   }});
  cases.push_back({"sub", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
                     Tensor w = random_tensor({2, 3}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(sub(in[0], in[1]), w); }, {a, b});
                   }});
  cases.push_back({"mul", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({2, 5}, rng), b = random_tensor({2, 5}, rng);
                     Tensor w = random_tensor({2, 5}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(mul(in[0], in[1]), w); }, {a, b});
                   }});
  cases.push_back({"scale", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({6}, rng), w = random_tensor({6}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(scale(in[0], -2.5), w); }, {a});
                   }});
  cases.push_back({"concat", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
                     Tensor w = random_tensor({2, 5}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(concat({in[0], in[1]}, 1), w); },
                                       {a, b});
                   }});
  cases.push_back({"reshape", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({2, 6}, rng), w = random_tensor({3, 4}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(reshape(in[0], {3, 4}), w); }, {a});
                   }});
  cases.push_back({"leaky_relu", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({10}, rng, -1.0, 1.0, 1e-3), w = random_tensor({10}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(leaky_relu(in[0]), w); }, {a});
                   }});
  cases.push_back({"tanh", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({10}, rng, -2.0, 2.0), w = random_tensor({10}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(ltrv::tanh(in[0]), w); }, {a});
                   }});
  cases.push_back({"softplus", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({10}, rng, -3.0, 3.0), w = random_tensor({10}, rng);
                     return check_case([w](const auto& in) { return weighted_sum(softplus(in[0]), w); }, {a});
                   }});
  cases.push_back({"abs_sum", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({8}, rng, -1.0, 1.0, 1e-3);
                     return check_case([](const auto& in) { return abs_sum(in[0]); }, {a});
                   }});
  cases.push_back({"huber_sum", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({8}, rng, -1.0, 1.0);
                     // Keep probes away from the curvature switch at |r| = delta.
                     std::vector<double> v = a.to_vector();
                     for (double& x : v)
                       if (std::abs(std::abs(x) - 0.3) < 1e-3) x += 3e-3;
                     return check_case([](const auto& in) { return huber_sum(in[0], 0.3); }, {Tensor({8}, v)});
                   }});
  cases.push_back({"square_sum", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({8}, rng);
                     return check_case([](const auto& in) { return square_sum(in[0]); }, {a});
                   }});
  cases.push_back({"mean", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({8}, rng), w = random_tensor({8}, rng);
                     return check_case([w](const auto& in) { return mean(mul(in[0], w)); }, {a});
                   }});
  cases.push_back({"conv2d", [](std::mt19937_64& rng) {
                     Tensor x = random_tensor({2, 2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng);
                     Tensor b = random_tensor({3}, rng), w = random_tensor({2, 3, 3, 3}, rng);
                     return check_case(
                         [w](const auto& in) { return weighted_sum(conv2d(in[0], in[1], in[2], {2, 1}), w); },
                         {x, k, b});
                   }});
  cases.push_back({"transpose_conv2d", [](std::mt19937_64& rng) {
                     Tensor x = random_tensor({2, 3, 3, 3}, rng), k = random_tensor({3, 2, 4, 4}, rng);
                     Tensor b = random_tensor({2}, rng), w = random_tensor({2, 2, 6, 6}, rng);
                     return check_case(
                         [w](const auto& in) {
                           return weighted_sum(transpose_conv2d(in[0], in[1], in[2], {2, 1}), w);
                         },
                         {x, k, b});
                   }});
  cases.push_back({"normalize_batch", [](std::mt19937_64& rng) {
                     Tensor x = random_tensor({4, 3, 2, 2}, rng), g = random_tensor({3}, rng, 0.5, 1.5);
                     Tensor b = random_tensor({3}, rng), w = random_tensor({4, 3, 2, 2}, rng);
                     return check_case(
                         [w](const auto& in) {
                           NormStats stats(3);
                           return weighted_sum(normalize_batch(in[0], in[1], in[2], stats, true), w);
                         },
                         {x, g, b});
                   }});
  cases.push_back({"kl_to_uniform_hist", [](std::mt19937_64& rng) {
                     Tensor a = random_tensor({12}, rng, 0.05, 0.95);
                     return check_case([](const auto& in) { return kl_to_uniform_hist(in[0], {8, 0.1}); }, {a});
                   }});
  return cases;
}

}  // namespace ltrv::testing
