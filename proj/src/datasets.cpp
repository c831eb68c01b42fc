#include "ltrv/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>

namespace ltrv {

Vec3 toy_mode(double x, int sign) {
  const double s = 4.0 * static_cast<double>(sign);
  return {s * x, s * x * x, s * x * x * x};
}

SampleSet ToyDataset::to_samples() const {
  if (x.empty()) throw std::invalid_argument("toy dataset is empty");
  std::vector<double> yv;
  std::vector<SampleKey> keys;
  for (std::size_t i = 0; i < size(); ++i) {
    yv.insert(yv.end(), y[i].begin(), y[i].end());
    keys.push_back(SampleKey{i, sign[i] > 0 ? 0u : 1u});
  }
  return SampleSet{Tensor({size(), 1}, x), Tensor({size(), 3}, std::move(yv)), std::move(keys)};
}

ToyDataset toy_generate(std::size_t n, double x_lo, double x_hi, double p_plus, Rng& rng) {
  if (n == 0) throw std::invalid_argument("toy_generate: n must be >= 1");
  if (!(x_hi > x_lo)) throw std::invalid_argument("toy_generate: empty x range");
  if (!(p_plus >= 0.0 && p_plus <= 1.0)) throw std::invalid_argument("toy_generate: p_plus must lie in [0, 1]");
  std::uniform_real_distribution<double> ux(x_lo, x_hi), u01(0.0, 1.0);
  ToyDataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    const int s = u01(rng) < p_plus ? 1 : -1;
    d.x.push_back(x);
    d.sign.push_back(s);
    d.y.push_back(toy_mode(x, s));
  }
  return d;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("truncated IDX header (") + what + ")");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

void expect_magic(std::istream& in, std::uint32_t want) {
  const std::uint32_t magic = read_be32(in, "magic");
  if (magic != want) {
    throw FormatError("bad IDX magic " + std::to_string(magic) + ", expected " + std::to_string(want));
  }
}

Rng epoch_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor stack_images(const std::vector<std::vector<double>>& images) {
  std::vector<double> v;
  v.reserve(images.size() * kImagePixels);
  for (const auto& img : images)
    for (double p : img) v.push_back(to_model_units(p));
  return Tensor({images.size(), 1, kImageSide, kImageSide}, std::move(v));
}

void apply_mask(std::vector<double>& img, MaskRegion m) {
  for (std::size_t r = m.row; r < m.row + m.height; ++r)
    for (std::size_t c = 0; c < kImageSide; ++c) img[r * kImageSide + c] = to_pixel_units(kMaskFill);
}

}  // namespace

std::vector<std::vector<double>> read_idx_images(std::istream& in) {
  expect_magic(in, 2051);
  const std::uint32_t count = read_be32(in, "count");
  const std::uint32_t rows = read_be32(in, "rows");
  const std::uint32_t cols = read_be32(in, "cols");
  if (rows != 28 || cols != 28) {
    throw FormatError("expected 28x28 images, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<std::vector<double>> out;
  out.reserve(count);
  std::vector<unsigned char> buf(28 * 28);
  const std::size_t off = (kImageSide - 28) / 2;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw FormatError("IDX image file truncated at image " + std::to_string(i) + " of " + std::to_string(count));
    }
    std::vector<double> img(kImagePixels, 0.0);
    for (std::size_t r = 0; r < 28; ++r)
      for (std::size_t c = 0; c < 28; ++c) img[(r + off) * kImageSide + c + off] = buf[r * 28 + c] / 255.0;
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
  expect_magic(in, 2049);
  const std::uint32_t count = read_be32(in, "count");
  std::vector<std::uint8_t> out(count);
  if (count && !in.read(reinterpret_cast<char*>(out.data()), count)) throw FormatError("IDX label file truncated");
  return out;
}

ImageSet mnist_load(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
  if (!fi) throw std::runtime_error("cannot open " + images.string());
  if (!fl) throw std::runtime_error("cannot open " + labels.string());
  ImageSet set{read_idx_images(fi), read_idx_labels(fl)};
  if (set.images.size() != set.labels.size()) {
    throw FormatError("image count " + std::to_string(set.images.size()) + " != label count " +
                      std::to_string(set.labels.size()));
  }
  return set;
}

void CorruptionSpec::validate() const {
  if (!(overlap_rate >= 0.0 && overlap_rate <= 1.0)) throw std::invalid_argument("overlap_rate must lie in [0, 1]");
  if (!(p_box >= 0.0 && p_box <= 1.0)) throw std::invalid_argument("p_box must lie in [0, 1]");
  if (mask_min < 1 || mask_min > mask_max) throw std::invalid_argument("mask height range is empty");
  if (mask_max > kTopHalf) throw std::invalid_argument("mask taller than the top half");
  if (box.size < 1 || box.row + box.size > kTopHalf || box.col + box.size > kImageSide) {
    throw std::invalid_argument("box must lie inside the top half");
  }
  if (mask_covers_box && box.row + box.size > mask_max) throw std::invalid_argument("no mask height can cover the box");
}

namespace {

MaskRegion covering_mask(const CorruptionSpec& spec, Rng& rng) {
  MaskRegion m;
  m.row = uniform_index(rng, 0, spec.box.row);
  m.height = uniform_index(rng, std::max(spec.mask_min, spec.box.row + spec.box.size - m.row),
                           std::min(spec.mask_max, kTopHalf - m.row));
  return m;
}

}  // namespace

CorruptedBatch corrupt_batch(const ImageSet& set, const CorruptionSpec& spec, std::size_t epoch) {
  spec.validate();
  if (set.size() == 0) throw std::invalid_argument("corrupt_batch: no images");
  Rng rng = epoch_rng(spec.seed, epoch);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = set.size();
  std::vector<std::vector<double>> inputs, targets;
  CorruptedBatch out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> t = set.images[i];
    const bool overlap = n > 1 && u(rng) < spec.overlap_rate;
    if (overlap) {
      std::size_t j = uniform_index(rng, 0, n - 2);
      if (j >= i) ++j;
      std::copy_n(set.images[j].begin(), kTopHalf * kImageSide, t.begin());
    }
    const bool boxed = u(rng) < spec.p_box;
    if (boxed)
      for (std::size_t r = 0; r < spec.box.size; ++r)
        for (std::size_t c = 0; c < spec.box.size; ++c) t[(spec.box.row + r) * kImageSide + spec.box.col + c] = 1.0;
    MaskRegion m;
    if (spec.mask_covers_box) {
      m = covering_mask(spec, rng);
    } else {
      m.height = uniform_index(rng, spec.mask_min, spec.mask_max);
      m.row = uniform_index(rng, 0, kTopHalf - m.height);
    }
    std::vector<double> x = t;
    apply_mask(x, m);
    inputs.push_back(std::move(x));
    targets.push_back(std::move(t));
    out.masks.push_back(m);
    out.overlapped.push_back(overlap);
    out.boxed.push_back(boxed);
  }
  out.inputs = stack_images(inputs);
  out.targets = stack_images(targets);
  return out;
}

CorruptedBatch masked_box_probe(const ImageSet& set, const CorruptionSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (set.size() == 0) throw std::invalid_argument("masked_box_probe: no images");
  if (spec.box.row + spec.box.size > spec.mask_max) {
    throw std::invalid_argument("masked_box_probe: no mask height can cover the box");
  }
  Rng rng = epoch_rng(seed, 0x9e3779b9u);
  std::vector<std::vector<double>> inputs;
  CorruptedBatch out;
  for (const auto& img : set.images) {
    const MaskRegion m = covering_mask(spec, rng);
    std::vector<double> x = img;
    apply_mask(x, m);
    inputs.push_back(std::move(x));
    out.masks.push_back(m);
    out.overlapped.push_back(false);
    out.boxed.push_back(false);
  }
  out.inputs = stack_images(inputs);
  out.targets = stack_images(set.images);
  return out;
}

DataSource image_source(const ImageSet& set, const CorruptionSpec& spec) {
  spec.validate();
  return [set, spec](std::size_t epoch) {
    CorruptedBatch b = corrupt_batch(set, spec, epoch);
    std::vector<SampleKey> keys;
    for (std::size_t i = 0; i < set.size(); ++i) keys.push_back(SampleKey{i, std::nullopt});
    return SampleSet{b.inputs, b.targets, std::move(keys)};
  };
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::vector<double>>& images, std::size_t columns) {
  if (images.empty() || columns == 0) throw std::invalid_argument("write_pgm: nothing to write");
  const std::size_t cols = std::min(columns, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  const std::size_t w = cols * kImageSide, h = rows * kImageSide;
  std::vector<unsigned char> px(w * h, 0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].size() != kImagePixels) throw std::invalid_argument("write_pgm: images must be 32x32");
    const std::size_t r0 = (k / cols) * kImageSide, c0 = (k % cols) * kImageSide;
    for (std::size_t r = 0; r < kImageSide; ++r)
      for (std::size_t c = 0; c < kImageSide; ++c) {
        const double v = std::clamp(images[k][r * kImageSide + c], 0.0, 1.0);
        px[(r0 + r) * w + c0 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace ltrv
