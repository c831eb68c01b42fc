#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ltrv/latent.hpp"
#include "ltrv/training.hpp"

namespace ltrv {

// ---------------------------------------------------------------- toy task

using Vec3 = std::array<double, 3>;

/// sign * 4 * (x, x^2, x^3).
Vec3 toy_mode(double x, int sign);

struct ToyDataset {
  std::vector<double> x;
  std::vector<Vec3> y;
  std::vector<int> sign;  // +1 or -1

  std::size_t size() const { return x.size(); }
  /// Keys (i, 0) for the + mode and (i, 1) for the - mode.
  SampleSet to_samples() const;
};

ToyDataset toy_generate(std::size_t n, double x_lo, double x_hi, double p_plus, Rng& rng);

/// Evenly spaced points covering [lo, hi] inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// ----------------------------------------------------------------- images

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

struct ImageSet {
  /// 32x32 row-major images with values in [0, 1].
  std::vector<std::vector<double>> images;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return images.size(); }
};

/// IDX image file (magic 2051) of 28x28 bytes, zero-padded to 32x32.
std::vector<std::vector<double>> read_idx_images(std::istream& in);
/// IDX label file (magic 2049).
std::vector<std::uint8_t> read_idx_labels(std::istream& in);
ImageSet mnist_load(const std::filesystem::path& images, const std::filesystem::path& labels);

struct Box {
  std::size_t row = 1;
  std::size_t col = 13;
  std::size_t size = 6;
};

struct CorruptionSpec {
  /// Fraction of images whose top half is replaced by another image's.
  double overlap_rate = 0.2;
  std::size_t mask_min = 4;
  std::size_t mask_max = 12;
  /// Fraction of targets that receive the white box.
  double p_box = 0.0;
  Box box;
  /// Draw every mask so that it hides the whole box.
  bool mask_covers_box = false;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kTopHalf = kImageSide / 2;
/// Value written into masked pixels, in model units.
inline constexpr double kMaskFill = 0.0;

struct MaskRegion {
  std::size_t row = 0;
  std::size_t height = 0;

  bool covers(const Box& b) const { return row <= b.row && b.row + b.size <= row + height; }
};

struct CorruptedBatch {
  Tensor inputs;    // [N,1,32,32], model units, masked
  Tensor targets;   // [N,1,32,32], model units, unmasked
  std::vector<MaskRegion> masks;
  std::vector<bool> overlapped;
  std::vector<bool> boxed;
};

/// Maps [0, 1] pixels to the generator's [-1, 1] range and back.
inline double to_model_units(double p) { return 2.0 * p - 1.0; }
inline double to_pixel_units(double v) { return 0.5 * (v + 1.0); }

/// Applies the corruption protocol; draws depend only on (spec.seed, epoch).
CorruptedBatch corrupt_batch(const ImageSet& set, const CorruptionSpec& spec, std::size_t epoch);

/// A mask covering the box, for evaluating inputs that admit both box modes.
CorruptedBatch masked_box_probe(const ImageSet& set, const CorruptionSpec& spec, std::uint64_t seed);

/// Training source: corruption re-drawn every epoch, keys by sample index.
DataSource image_source(const ImageSet& set, const CorruptionSpec& spec);

/// Binary PGM (P5, maxval 255) of one 32x32 image in [0, 1], or a grid of them.
void write_pgm(const std::filesystem::path& path, const std::vector<std::vector<double>>& images, std::size_t columns);

}  // namespace ltrv
