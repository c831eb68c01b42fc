#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ltrv/adam.hpp"
#include "ltrv/checkpoint.hpp"
#include "ltrv/ops.hpp"
#include "ltrv/tape.hpp"
#include "../support/gradcheck.hpp"

using namespace ltrv;

TEST_CASE("tensor construction validates shape and finiteness") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), TensorError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}), TensorError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), TensorError);
  CHECK_THROWS_AS(Tensor({0}, {}), TensorError);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("forward examples") {
  Tensor v = Tensor::vector({0.3, -1.2, 7.0});
  CHECK(same_values(matmul(Tensor::identity(3), v), v));
  CHECK(leaky_relu(Tensor::scalar(-1.0)).item() == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(ltrv::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK_THROWS_AS(matmul(Tensor::identity(3), Tensor::vector({1, 2})), TensorError);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), TensorError);
}

TEST_CASE("backward examples") {
  {
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({3.0}));
    Gradients g = tape.backward(square_sum(x));
    CHECK(g[x][0] == doctest::Approx(6.0));
  }
  {
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({-2.0, 5.0}));
    Gradients g = tape.backward(abs_sum(x));
    CHECK(g[x][0] == -1.0);
    CHECK(g[x][1] == 1.0);
  }
  {
    // Subgradient conventions at the non-smooth points.
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({0.0}));
    Tensor loss = add(abs_sum(x), mean(leaky_relu(x)));
    CHECK(tape.backward(loss)[x][0] == doctest::Approx(0.2));
  }
}

TEST_CASE("backward errors and leaf bookkeeping") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Tensor unused = tape.leaf(Tensor::vector({4.0}));
  CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), TensorError);  // not scalar
  Tensor loss = square_sum(x);
  Gradients g = tape.backward(loss);
  CHECK(g[unused][0] == 0.0);
  CHECK_THROWS_AS(tape.backward(loss), TensorError);  // consumed
  CHECK_THROWS_AS(tape.leaf(x), TensorError);

  Tape other;
  Tensor y = other.leaf(Tensor::vector({1.0, 1.0}));
  Tape third;
  Tensor w = third.leaf(Tensor::vector({1.0, 1.0}));
  CHECK_THROWS_AS(add(y, w), TensorError);
}

TEST_CASE("fan-out accumulates and every record is visited once") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::vector({1.5, -0.5}));
  Tensor a = ltrv::tanh(x);
  Tensor loss = add(square_sum(a), square_sum(mul(a, a)));  // a used three times
  const std::size_t records = tape.size();
  Gradients g = tape.backward(loss);
  CHECK(tape.visited() == records - 1);  // everything but the leaf
  for (std::size_t i = 0; i < 2; ++i) {
    const double t = std::tanh(x[i]);
    const double expect = (2 * t + 4 * t * t * t) * (1 - t * t);
    CHECK(g[x][i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("finite_diff_grad examples") {
  auto sum = [](const Tensor& t) {
    double s = 0;
    for (double v : t.data()) s += v;
    return s;
  };
  Tensor ones = finite_diff_grad(sum, Tensor::vector({0.1, 2.0, -3.0}), 1e-5);
  for (double v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  Tensor sq = finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, Tensor::scalar(3.0), 1e-5);
  CHECK(std::abs(sq[0] - 6.0) < 1e-6);

  Tensor target = Tensor::vector({0.0, 0.0});
  auto l1 = [&](const Tensor& t) { return abs_sum(sub(t, target)).item(); };
  Tensor signs = finite_diff_grad(l1, Tensor::vector({-4.0, 3.0}), 1e-5);
  CHECK(signs[0] == doctest::Approx(-1.0));
  CHECK(signs[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(finite_diff_grad(sum, Tensor::scalar(1.0), 0.0), TensorError);
  auto blowup = [](const Tensor& t) { return t[0] > 1.0 ? std::numeric_limits<double>::infinity() : t[0]; };
  CHECK_THROWS_AS(finite_diff_grad(blowup, Tensor::scalar(1.0), 1e-3), TensorError);
}

TEST_CASE("every op kind matches finite differences on random inputs") {
  std::mt19937_64 rng(11);
  for (const auto& c : testing::all_op_cases()) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) worst = std::max(worst, c.run(rng));
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("three-layer MLP gradient matches finite differences") {
  std::mt19937_64 rng(5);
  auto mlp = [](const std::vector<Tensor>& in) {
    Tensor h = leaky_relu(add(matmul(in[0], in[1]), in[2]));
    h = ltrv::tanh(add(matmul(h, in[3]), in[4]));
    Tensor out = softplus(matmul(h, in[5]));
    return square_sum(out);
  };
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> in = {testing::random_tensor({3, 4}, rng), testing::random_tensor({4, 6}, rng),
                              testing::random_tensor({6}, rng),    testing::random_tensor({6, 5}, rng),
                              testing::random_tensor({5}, rng),    testing::random_tensor({5, 2}, rng)};
    CHECK(testing::check_case(mlp, in) < 1e-4);
  }
}

TEST_CASE("conv outputs are deterministic") {
  std::mt19937_64 rng(3);
  Tensor x = testing::random_tensor({2, 3, 8, 8}, rng), w = testing::random_tensor({4, 3, 4, 4}, rng);
  Tensor b = testing::random_tensor({4}, rng);
  CHECK(same_values(conv2d(x, w, b, {2, 1}), conv2d(x, w, b, {2, 1})));
  Tensor wt = testing::random_tensor({4, 2, 4, 4}, rng);
  Tensor y = conv2d(x, w, b, {2, 1});
  CHECK(same_values(transpose_conv2d(y, wt, {}, {2, 1}), transpose_conv2d(y, wt, {}, {2, 1})));
  CHECK(transpose_conv2d(y, wt, {}, {2, 1}).shape() == Shape{2, 2, 8, 8});
  Tensor a = testing::random_tensor({5, 7}, rng), c = testing::random_tensor({7, 3}, rng);
  CHECK(same_values(matmul(a, c), matmul(a, c)));
}

TEST_CASE("transpose_conv2d is the adjoint of conv2d") {
  std::mt19937_64 rng(8);
  Tensor x = testing::random_tensor({1, 2, 6, 6}, rng), w = testing::random_tensor({3, 2, 4, 4}, rng);
  Tensor y = testing::random_tensor({1, 3, 3, 3}, rng);
  const Tensor cx = conv2d(x, w, {}, {2, 1});
  const Tensor ty = transpose_conv2d(y, w, {}, {2, 1});
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) lhs += cx[i] * y[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * ty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("normalize_batch uses running statistics at inference and batch size one") {
  NormStats stats(2);
  stats.mean = {1.0, -1.0};
  stats.var = {4.0, 1.0};
  stats.eps = 0.0;
  Tensor x = Tensor::matrix(1, 2, {3.0, 0.0});
  Tensor g = Tensor::vector({1.0, 2.0}), b = Tensor::vector({0.0, 0.5});
  Tensor y = normalize_batch(x, g, b, stats, true);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.5));
  CHECK(stats.mean[0] == 1.0);  // no update at batch size one

  Tensor batch = Tensor::matrix(2, 2, {0.0, 1.0, 2.0, 3.0});
  NormStats fresh(2);
  normalize_batch(batch, g, b, fresh, true);
  CHECK(fresh.mean[0] == doctest::Approx(0.1));
}

TEST_CASE("adam examples") {
  std::vector<Tensor> params = {Tensor::vector({1.0, -2.0})};
  AdamState state(AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  adam_step(params, {Tensor::zeros({2})}, state);
  CHECK(params[0][0] == 1.0);
  CHECK(params[0][1] == -2.0);
  CHECK(state.step == 1);

  std::vector<Tensor> p1 = {Tensor::scalar(0.0)};
  AdamState s1(AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  adam_step(p1, {Tensor::scalar(1.0)}, s1);
  // t=1: m_hat = 1, v_hat = 1, step = lr / (1 + eps).
  CHECK(p1[0][0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-14));

  std::vector<Tensor> p2 = {Tensor::vector({0.5, 0.5})};
  AdamState s2;
  double prev0 = 0.5, prev1 = 0.5;
  for (int i = 0; i < 50; ++i) {
    adam_step(p2, {Tensor::vector({2.0, -0.3})}, s2);
    CHECK(p2[0][0] < prev0);
    CHECK(p2[0][1] > prev1);
    prev0 = p2[0][0];
    prev1 = p2[0][1];
  }
  CHECK(s2.step == 50);
  CHECK_THROWS_AS(adam_step(p2, {Tensor::zeros({3})}, s2), TensorError);
}

TEST_CASE("checkpoint round trip and rejection") {
  NamedTensors nt;
  nt.set("H/l0/w", Tensor::matrix(2, 2, {1.0, -0.0, 1e-300, 3.141592653589793}));
  nt.set("meta/zdim", Tensor::scalar(3.0));
  std::stringstream buf;
  write_checkpoint(buf, nt);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "LTRV");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  NamedTensors back = read_checkpoint(buf);
  REQUIRE(back.size() == 2);
  CHECK(same_values(back.get("H/l0/w"), nt.get("H/l0/w")));
  CHECK(std::signbit(back.get("H/l0/w")[1]));

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream s1(bad_magic);
  CHECK_THROWS_AS(read_checkpoint(s1), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  std::stringstream s2(bad_version);
  CHECK_THROWS_AS(read_checkpoint(s2), FormatError);
  std::stringstream s3(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(s3), FormatError);
}
