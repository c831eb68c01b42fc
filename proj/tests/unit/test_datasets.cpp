#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ltrv/datasets.hpp"

using namespace ltrv;

namespace {

void put_be32(std::string& s, std::uint32_t v) {
  for (int shift : {24, 16, 8, 0}) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string idx_images(const std::vector<std::vector<unsigned char>>& imgs) {
  std::string s;
  put_be32(s, 2051);
  put_be32(s, static_cast<std::uint32_t>(imgs.size()));
  put_be32(s, 28);
  put_be32(s, 28);
  for (const auto& img : imgs) s.append(img.begin(), img.end());
  return s;
}

ImageSet striped_set(std::size_t n) {
  ImageSet set;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> img(kImagePixels);
    for (std::size_t p = 0; p < kImagePixels; ++p) img[p] = static_cast<double>(p % 11 + i) / static_cast<double>(n + 10);
    set.images.push_back(img);
    set.labels.push_back(static_cast<std::uint8_t>(i % 10));
  }
  return set;
}

double pixel(const Tensor& t, std::size_t i, std::size_t p) { return t[i * kImagePixels + p]; }

}  // namespace

TEST_CASE("toy_generate examples") {
  const Vec3 y = toy_mode(0.5, 1);
  CHECK(y == Vec3{2.0, 1.0, 0.5});
  CHECK(toy_mode(0.0, 1) == Vec3{0.0, 0.0, 0.0});
  CHECK(std::abs(toy_mode(0.0, -1)[0]) == 0.0);

  Rng rng(3);
  const ToyDataset all_plus = toy_generate(200, 0.0, 1.0, 1.0, rng);
  for (int s : all_plus.sign) CHECK(s == 1);

  const ToyDataset d = toy_generate(1000, 0.2, 0.7, 0.5, rng);
  std::size_t plus = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.x[i] >= 0.2);
    CHECK(d.x[i] < 0.7);
    // Bit-level recomputation of the defining equation.
    CHECK(d.y[i] == toy_mode(d.x[i], d.sign[i]));
    plus += d.sign[i] > 0;
  }
  CHECK(plus > 400);
  CHECK(plus < 600);
  CHECK_THROWS(toy_generate(10, 1.0, 1.0, 0.5, rng));
  CHECK_THROWS(toy_generate(0, 0.0, 1.0, 0.5, rng));
  CHECK_THROWS(toy_generate(10, 0.0, 1.0, 1.5, rng));
}

TEST_CASE("toy samples carry mode keys") {
  Rng rng(1);
  const ToyDataset d = toy_generate(50, 0.0, 1.0, 0.5, rng);
  const SampleSet s = d.to_samples();
  CHECK(s.x.shape() == Shape{50, 1});
  CHECK(s.y.shape() == Shape{50, 3});
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(s.keys[i].sample == i);
    CHECK(*s.keys[i].mode == (d.sign[i] > 0 ? 0u : 1u));
  }
}

TEST_CASE("linspace") {
  const std::vector<double> v = linspace(0.0, 1.0, 5);
  CHECK(v == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(linspace(2.0, 3.0, 1) == std::vector<double>{2.0});
}

TEST_CASE("IDX images: round trip, empty and bad magic") {
  std::vector<unsigned char> img(28 * 28, 0);
  img[0] = 255;
  img[28 * 5 + 9] = 51;
  std::istringstream in(idx_images({img}));
  const auto out = read_idx_images(in);
  REQUIRE(out.size() == 1);
  CHECK(out[0][2 * kImageSide + 2] == 1.0);
  CHECK(out[0][7 * kImageSide + 11] == 51.0 / 255.0);
  CHECK(out[0][0] == 0.0);
  double sum = 0.0;
  for (double p : out[0]) sum += p;
  CHECK(sum == doctest::Approx(1.0 + 0.2));

  std::istringstream empty(idx_images({}));
  CHECK(read_idx_images(empty).empty());

  std::string bad = idx_images({});
  bad[3] = 4;
  std::istringstream badin(bad);
  CHECK_THROWS_WITH_AS(read_idx_images(badin), doctest::Contains("2052"), FormatError);

  std::string truncated = idx_images({img});
  truncated.resize(truncated.size() - 10);
  std::istringstream tin(truncated);
  CHECK_THROWS_AS(read_idx_images(tin), FormatError);
}

TEST_CASE("IDX labels and mnist_load") {
  std::string labels;
  put_be32(labels, 2049);
  put_be32(labels, 2);
  labels.push_back(3);
  labels.push_back(9);
  std::istringstream in(labels);
  CHECK(read_idx_labels(in) == std::vector<std::uint8_t>{3, 9});

  const auto dir = std::filesystem::temp_directory_path() / "ltrv_idx_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "img", std::ios::binary) << idx_images({std::vector<unsigned char>(784, 0)});
    std::ofstream(dir / "lab", std::ios::binary) << labels;
  }
  CHECK_THROWS_AS(mnist_load(dir / "img", dir / "lab"), FormatError);
  CHECK_THROWS(mnist_load(dir / "missing", dir / "lab"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("corruption rates 0 and 1") {
  const ImageSet set = striped_set(12);
  CorruptionSpec spec;
  spec.overlap_rate = 0.0;
  const CorruptedBatch b0 = corrupt_batch(set, spec, 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK_FALSE(b0.overlapped[i]);
    const MaskRegion m = b0.masks[i];
    CHECK(m.height >= spec.mask_min);
    CHECK(m.height <= spec.mask_max);
    CHECK(m.row + m.height <= kTopHalf);
    for (std::size_t p = 0; p < kImagePixels; ++p) {
      const std::size_t r = p / kImageSide;
      const double orig = to_model_units(set.images[i][p]);
      CHECK(pixel(b0.targets, i, p) == orig);
      CHECK(pixel(b0.inputs, i, p) == (r >= m.row && r < m.row + m.height ? kMaskFill : orig));
    }
  }

  spec.overlap_rate = 1.0;
  const CorruptedBatch b1 = corrupt_batch(set, spec, 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(b1.overlapped[i]);
    bool differs = false;
    for (std::size_t p = 0; p < kTopHalf * kImageSide; ++p)
      differs = differs || pixel(b1.targets, i, p) != to_model_units(set.images[i][p]);
    CHECK(differs);
  }
}

TEST_CASE("corruption never touches the bottom half and is deterministic") {
  const ImageSet set = striped_set(20);
  CorruptionSpec spec;
  spec.overlap_rate = 0.5;
  spec.p_box = 0.5;
  spec.seed = 11;
  for (std::size_t epoch : {0u, 1u, 5u}) {
    const CorruptedBatch b = corrupt_batch(set, spec, epoch);
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t p = kTopHalf * kImageSide; p < kImagePixels; ++p) {
        CHECK(pixel(b.inputs, i, p) == to_model_units(set.images[i][p]));
        CHECK(pixel(b.targets, i, p) == to_model_units(set.images[i][p]));
      }
    const CorruptedBatch again = corrupt_batch(set, spec, epoch);
    CHECK(again.inputs.to_vector() == b.inputs.to_vector());
    CHECK(again.boxed == b.boxed);
  }
  CHECK(corrupt_batch(set, spec, 0).inputs.to_vector() != corrupt_batch(set, spec, 1).inputs.to_vector());
}

TEST_CASE("white box and probe masks") {
  const ImageSet set = striped_set(6);
  CorruptionSpec spec;
  spec.overlap_rate = 0.0;
  spec.p_box = 1.0;
  const CorruptedBatch b = corrupt_batch(set, spec, 2);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(b.boxed[i]);
    CHECK(pixel(b.targets, i, (spec.box.row + 2) * kImageSide + spec.box.col + 3) == 1.0);
  }
  const CorruptedBatch probe = masked_box_probe(set, spec, 4);
  for (const MaskRegion& m : probe.masks) CHECK(m.covers(spec.box));

  spec.mask_covers_box = true;
  for (std::size_t epoch = 0; epoch < 5; ++epoch) {
    for (const MaskRegion& m : corrupt_batch(set, spec, epoch).masks) {
      CHECK(m.covers(spec.box));
      CHECK(m.height >= spec.mask_min);
      CHECK(m.height <= spec.mask_max);
      CHECK(m.row + m.height <= kTopHalf);
    }
  }
  spec.box.row = 8;
  CHECK_THROWS(corrupt_batch(set, spec, 0));

  CorruptionSpec bad;
  bad.mask_max = 20;
  CHECK_THROWS(corrupt_batch(set, bad, 0));
  bad = CorruptionSpec{};
  bad.overlap_rate = 1.5;
  CHECK_THROWS(corrupt_batch(set, bad, 0));
}

TEST_CASE("image_source keys by sample index") {
  const ImageSet set = striped_set(4);
  const DataSource src = image_source(set, CorruptionSpec{});
  const SampleSet s = src(3);
  CHECK(s.x.shape() == Shape{4, 1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.keys[i].sample == i);
    CHECK_FALSE(s.keys[i].mode.has_value());
  }
}

TEST_CASE("write_pgm writes a P5 grid") {
  const auto path = std::filesystem::temp_directory_path() / "ltrv_grid.pgm";
  write_pgm(path, striped_set(3).images, 2);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 64);
  CHECK(h == 64);
  CHECK(maxval == 255);
  CHECK(std::filesystem::file_size(path) == 13 + 64 * 64);
  std::filesystem::remove(path);
}
