#include "ltrv/latent.hpp"

#include <cmath>

namespace ltrv {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

LatentCode::LatentCode(std::vector<double> z) : z_(std::move(z)) {
  if (z_.empty()) throw DegenerateInput("latent code must have dimension >= 1");
  const double n = l2_norm(z_);
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitNormTolerance) {
    throw DegenerateInput("latent code is not unit-norm (|z| = " + std::to_string(n) + ")");
  }
}

LatentCode sample_sphere(std::size_t dim, Rng& rng) {
  if (dim == 0) throw DegenerateInput("sample_sphere: dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (;;) {
    for (double& x : v) x = normal(rng);
    if (l2_norm(v) > kMinProjectNorm) return project_sphere(v);
  }
}

LatentCode project_sphere(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > kMinProjectNorm) || !std::isfinite(n)) {
    throw DegenerateInput("project_sphere: vector norm " + std::to_string(n) + " is too small to normalize");
  }
  std::vector<double> z(v.begin(), v.end());
  for (double& x : z) x /= n;
  return LatentCode(std::move(z));
}

std::string SampleKey::to_string() const {
  std::string s = std::to_string(sample);
  if (mode) s += ":" + std::to_string(*mode);
  return s;
}

SampleKey SampleKey::parse(const std::string& text) {
  SampleKey key;
  const auto colon = text.find(':');
  try {
    std::size_t used = 0;
    key.sample = std::stoul(text.substr(0, colon), &used);
    if (used != (colon == std::string::npos ? text.size() : colon)) throw std::invalid_argument(text);
    if (colon != std::string::npos) key.mode = std::stoul(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw FormatError("malformed latent key '" + text + "'");
  }
  return key;
}

const LatentCode& LatentTable::get_or_init(const SampleKey& key, Rng& rng) {
  auto it = codes_.find(key);
  if (it != codes_.end()) return it->second;
  return codes_.emplace(key, sample_sphere(dim_, rng)).first->second;
}

const LatentCode& LatentTable::get(const SampleKey& key) const {
  auto it = codes_.find(key);
  if (it == codes_.end()) throw std::out_of_range("no latent code for key " + key.to_string());
  return it->second;
}

void LatentTable::update(const SampleKey& key, const LatentCode& code) {
  if (code.dim() != dim_) {
    throw DegenerateInput("latent dimension " + std::to_string(code.dim()) + " != table dimension " +
                          std::to_string(dim_));
  }
  codes_.insert_or_assign(key, code);
}

void LatentTable::update(const SampleKey& key, std::vector<double> z) { update(key, LatentCode(std::move(z))); }

void LatentTable::export_to(NamedTensors& out) const {
  for (const auto& [key, code] : codes_) out.set("latent/" + key.to_string(), Tensor::vector(code.values()));
}

LatentTable LatentTable::import_from(const NamedTensors& in, std::size_t dim) {
  LatentTable table(dim);
  const std::string prefix = "latent/";
  for (const std::string& name : in.names_with_prefix(prefix)) {
    table.update(SampleKey::parse(name.substr(prefix.size())), LatentCode(in.get(name).to_vector()));
  }
  return table;
}

}  // namespace ltrv
