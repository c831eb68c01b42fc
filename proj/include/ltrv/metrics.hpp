#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "ltrv/datasets.hpp"
#include "ltrv/networks.hpp"

namespace ltrv {

struct UncertaintyEstimate {
  std::vector<double> variance;  // one entry per output element
  std::size_t passes = 0;
  double delta = 0.0;

  double mean_variance() const;
};

/// Sample variance (divisor K-1) of the generator output over K codes drawn
/// around z_center: Gaussian perturbation of scale delta/2, then projection.
UncertaintyEstimate uncertainty(const ModelBundle& model, const Tensor& x, const LatentCode& z_center, double delta,
                                std::size_t passes, Rng& rng);
/// Same estimator for an arbitrary map from a [K, d] batch of codes to outputs.
UncertaintyEstimate uncertainty(const std::function<Tensor(const Tensor&)>& g, const LatentCode& z_center,
                                double delta, std::size_t passes, Rng& rng);

inline constexpr std::size_t kDiversitySamples = 20;
inline constexpr std::size_t kDiversityPicked = 10;

/// Mean per-pixel standard deviation over the 10 samples whose mean
/// intensity lies farthest from that of the most typical sample.
double diversity_score(const std::vector<std::vector<double>>& samples);

struct ToyPointCoverage {
  bool plus = false;
  bool minus = false;
  std::size_t phantom = 0;  // outputs farther than eps from both modes
  std::size_t total = 0;
};

struct ToyCoverage {
  std::vector<ToyPointCoverage> points;
  double plus_fraction = 0.0;
  double minus_fraction = 0.0;
  double both_fraction = 0.0;
  double phantom_fraction = 0.0;
};

/// outputs[i] holds every output produced for x_grid[i].
ToyCoverage mode_coverage_toy(const std::vector<std::vector<Vec3>>& outputs, const std::vector<double>& x_grid,
                              double eps);

double distance_to_nearest_mode(const Vec3& y, double x);

/// +infinity when the inputs are identical.
double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak);
double l1_metric(const std::vector<double>& a, const std::vector<double>& b);

/// Single-link clusters under `threshold`; returns the cluster id of each item.
std::vector<std::size_t> single_link_clusters(std::size_t count,
                                              const std::function<double(std::size_t, std::size_t)>& distance,
                                              double threshold);

}  // namespace ltrv
