#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltrv/checkpoint.hpp"

namespace ltrv {

using Rng = std::mt19937_64;

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kMinProjectNorm = 1e-12;

double l2_norm(std::span<const double> v);

/// A point on the unit sphere S^{d-1}.
class LatentCode {
 public:
  /// Wraps an already-unit vector; throws if the norm is off by more than 1e-9.
  explicit LatentCode(std::vector<double> z);

  std::size_t dim() const { return z_.size(); }
  const std::vector<double>& values() const { return z_; }
  double operator[](std::size_t i) const { return z_[i]; }

  friend bool operator==(const LatentCode&, const LatentCode&) = default;

 private:
  std::vector<double> z_;
};

/// Isotropic unit vector: a standard Gaussian draw, normalized.
LatentCode sample_sphere(std::size_t dim, Rng& rng);

/// v / |v|; throws DegenerateInput when |v| <= 1e-12.
LatentCode project_sphere(std::span<const double> v);

/// Identifies one learned code: a training sample, optionally one of its modes.
struct SampleKey {
  std::size_t sample = 0;
  std::optional<std::size_t> mode;

  auto operator<=>(const SampleKey&) const = default;
  /// "12" or "12:1".
  std::string to_string() const;
  static SampleKey parse(const std::string& text);
};

/// Per-sample latent codes optimized during training.
class LatentTable {
 public:
  explicit LatentTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return codes_.size(); }
  bool contains(const SampleKey& key) const { return codes_.count(key) != 0; }

  /// Existing code, or a fresh sphere sample stored under `key`.
  const LatentCode& get_or_init(const SampleKey& key, Rng& rng);
  const LatentCode& get(const SampleKey& key) const;
  /// Replaces the code; the caller projects first.
  void update(const SampleKey& key, const LatentCode& code);
  /// Unchecked variant used by hot loops: throws if `z` is not unit-norm.
  void update(const SampleKey& key, std::vector<double> z);

  const std::map<SampleKey, LatentCode>& codes() const { return codes_; }

  /// Adds "latent/<key>" tensors.
  void export_to(NamedTensors& out) const;
  static LatentTable import_from(const NamedTensors& in, std::size_t dim);

 private:
  std::size_t dim_;
  std::map<SampleKey, LatentCode> codes_;
};

}  // namespace ltrv
