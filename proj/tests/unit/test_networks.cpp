#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ltrv/networks.hpp"

using namespace ltrv;

namespace {

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(sample_sphere(d, rng).values());
  return stack_rows(rows);
}

Tensor random_images(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n * 32 * 32);
  for (double& x : v) x = u(rng);
  return Tensor({n, 1, 32, 32}, std::move(v));
}

}  // namespace

TEST_CASE("toy encode and generate") {
  Rng rng(1);
  ModelBundle m = ModelBundle::create(ArchConfig{}, rng);
  Tensor x = Tensor({3, 1}, {0.0, 0.25, 0.5});
  Encoding a = m.encode(x);
  CHECK(a.h.shape() == Shape{3, 8});
  CHECK(same_values(a.h, m.encode(x).h));
  CHECK_THROWS_AS(m.encode(Tensor::zeros({3, 2})), TensorError);

  Tensor z = random_rows(3, 3, rng);
  Tensor y = m.generate(a, z);
  CHECK(y.shape() == Shape{3, 3});
  for (double v : y.data()) CHECK(std::abs(v) <= 5.0);
  CHECK(same_values(y, m.generate(a, z)));
  CHECK_THROWS_AS(m.generate(a, Tensor::filled({3, 3}, 1.0)), DegenerateInput);
  CHECK_THROWS_AS(m.generate(a, random_rows(2, 3, rng)), TensorError);
  CHECK_NOTHROW(m.generate_unchecked(a, Tensor::filled({3, 3}, 1.0)));
}

TEST_CASE("znet momentum head is nonnegative") {
  Rng rng(2);
  ModelBundle m = ModelBundle::create(ArchConfig{}, rng);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> hv(1000 * 8);
  for (double& v : hv) v = normal(rng);
  Tensor h({1000, 8}, hv);
  Tensor z = random_rows(1000, 3, rng);
  ZNetOutput out = m.znet(z, h);
  CHECK(out.z_next_raw.shape() == Shape{1000, 3});
  CHECK(out.rho.shape() == Shape{1000, 1});
  for (double r : out.rho.data()) CHECK(r >= 0.0);
  CHECK(same_values(out.rho, m.znet(z, h).rho));
  CHECK_THROWS_AS(m.znet(random_rows(4, 3, rng), h), TensorError);
}

TEST_CASE("image32 shapes, codomain and batch independence at inference") {
  Rng rng(3);
  ArchConfig cfg{Arch::Image32, 10};
  ModelBundle m = ModelBundle::create(cfg, rng);
  Tensor x = random_images(3, rng);
  Encoding enc = m.encode(x);
  CHECK(enc.h.shape() == Shape{3, 128});
  REQUIRE(enc.skips.size() == 3);
  CHECK(enc.skips[0].shape() == Shape{3, 32, 16, 16});
  CHECK(enc.skips[2].shape() == Shape{3, 128, 4, 4});
  Tensor z = random_rows(3, 10, rng);
  Tensor y = m.generate(enc, z);
  CHECK(y.shape() == Shape{3, 1, 32, 32});
  for (double v : y.data()) CHECK(std::abs(v) <= 1.0);

  Encoding one = m.encode(slice_rows(x, 1, 1));
  CHECK(one.h.to_vector() == row(enc.h, 1));
  Tensor y1 = m.generate(one, slice_rows(z, 1, 1));
  CHECK(y1.to_vector() == row(y, 1));
  CHECK_THROWS_AS(m.encode(Tensor::zeros({1, 1, 28, 28})), TensorError);
}

TEST_CASE("image32 output depends on z with a zeroed bottleneck") {
  Rng rng(4);
  ModelBundle m = ModelBundle::create(ArchConfig{Arch::Image32, 10}, rng);
  Encoding enc = m.encode(random_images(1, rng));
  enc.h = Tensor::zeros(enc.h.shape());
  Tensor a = m.generate(enc, random_rows(1, 10, rng));
  Tensor b = m.generate(enc, random_rows(1, 10, rng));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff += std::abs(a[i] - b[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("training-mode normalization updates running statistics") {
  Rng rng(5);
  ModelBundle m = ModelBundle::create(ArchConfig{Arch::Image32, 10}, rng);
  const std::vector<double> before = m.H.norms[0].mean;
  m.encode(random_images(4, rng), NormMode::Training);
  CHECK(m.H.norms[0].mean != before);
}

TEST_CASE("architecture determines parameter count; checkpoint round trip is bit-exact") {
  for (ArchConfig cfg : {ArchConfig{}, ArchConfig{Arch::Toy, 5}, ArchConfig{Arch::Image32, 10}}) {
    Rng r1(10), r2(99);
    ModelBundle a = ModelBundle::create(cfg, r1);
    ModelBundle b = ModelBundle::create(cfg, r2);
    CHECK(a.parameter_count() == b.parameter_count());

    NamedTensors named;
    a.export_to(named);
    std::stringstream buf;
    write_checkpoint(buf, named);
    ModelBundle back = ModelBundle::import_from(read_checkpoint(buf));
    CHECK(back.config().arch == cfg.arch);
    CHECK(back.zdim() == cfg.zdim);
    for (const auto& [net, other] : {std::pair{&a.H, &back.H}, std::pair{&a.G, &back.G}, std::pair{&a.Z, &back.Z}}) {
      REQUIRE(net->params.size() == other->params.size());
      for (std::size_t i = 0; i < net->params.size(); ++i) CHECK(same_values(net->params[i], other->params[i]));
      for (std::size_t i = 0; i < net->norms.size(); ++i) CHECK(net->norms[i].var == other->norms[i].var);
    }
  }
  NamedTensors named;
  Rng rng(0);
  ModelBundle::create(ArchConfig{}, rng).export_to(named);
  CHECK(named.contains("H/l0/w"));
  CHECK(named.contains("meta/arch"));
  CHECK(named.contains("meta/zdim"));
}
