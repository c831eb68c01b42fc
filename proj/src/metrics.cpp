#include "ltrv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ltrv {

double UncertaintyEstimate::mean_variance() const {
  if (variance.empty()) return 0.0;
  return std::accumulate(variance.begin(), variance.end(), 0.0) / static_cast<double>(variance.size());
}

UncertaintyEstimate uncertainty(const std::function<Tensor(const Tensor&)>& g, const LatentCode& z_center,
                                double delta, std::size_t passes, Rng& rng) {
  if (passes < 2) throw std::invalid_argument("uncertainty: at least two passes are required");
  if (!(delta > 0.0)) throw std::invalid_argument("uncertainty: delta must be > 0");
  std::normal_distribution<double> normal(0.0, delta / 2.0);
  std::vector<std::vector<double>> codes;
  for (std::size_t k = 0; k < passes; ++k) {
    std::vector<double> v = z_center.values();
    for (double& x : v) x += normal(rng);
    codes.push_back(project_sphere(v).values());
  }
  const Tensor y = g(stack_rows(codes));
  const std::size_t stride = y.numel() / passes;
  UncertaintyEstimate est{std::vector<double>(stride, 0.0), passes, delta};
  for (std::size_t j = 0; j < stride; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < passes; ++k) mean += y[k * stride + j];
    mean /= static_cast<double>(passes);
    double ss = 0.0;
    for (std::size_t k = 0; k < passes; ++k) ss += (y[k * stride + j] - mean) * (y[k * stride + j] - mean);
    est.variance[j] = ss / static_cast<double>(passes - 1);
  }
  return est;
}

UncertaintyEstimate uncertainty(const ModelBundle& model, const Tensor& x, const LatentCode& z_center, double delta,
                                std::size_t passes, Rng& rng) {
  if (x.dim(0) != 1) throw TensorError("uncertainty: expects a single input row");
  const Encoding enc = model.encode(x);
  return uncertainty([&](const Tensor& z) { return model.generate(enc.repeat_rows(z.dim(0)), z); }, z_center, delta,
                     passes, rng);
}

double diversity_score(const std::vector<std::vector<double>>& samples) {
  if (samples.size() != kDiversitySamples) {
    throw std::invalid_argument("diversity_score: expected 20 samples, got " + std::to_string(samples.size()));
  }
  const std::size_t n = samples[0].size();
  if (n == 0) throw std::invalid_argument("diversity_score: empty samples");
  std::vector<double> mu;
  for (const auto& s : samples) {
    if (s.size() != n) throw std::invalid_argument("diversity_score: samples differ in shape");
    mu.push_back(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n));
  }
  const double lambda = std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(mu.size());
  std::size_t typical = 0;
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (std::abs(mu[i] - lambda) < std::abs(mu[typical] - lambda)) typical = i;

  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(mu[a] - mu[typical]) > std::abs(mu[b] - mu[typical]);
  });
  order.resize(kDiversityPicked);

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // Shifted by the first pick so identical samples give exactly 0.
    const double shift = samples[order[0]][j];
    double mean = 0.0;
    for (std::size_t i : order) mean += samples[i][j] - shift;
    mean /= static_cast<double>(kDiversityPicked);
    double ss = 0.0;
    for (std::size_t i : order) ss += (samples[i][j] - shift - mean) * (samples[i][j] - shift - mean);
    total += std::sqrt(ss / static_cast<double>(kDiversityPicked));
  }
  return total / static_cast<double>(n);
}

double distance_to_nearest_mode(const Vec3& y, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (int s : {1, -1}) {
    const Vec3 m = toy_mode(x, s);
    best = std::min(best, std::hypot(y[0] - m[0], y[1] - m[1], y[2] - m[2]));
  }
  return best;
}

ToyCoverage mode_coverage_toy(const std::vector<std::vector<Vec3>>& outputs, const std::vector<double>& x_grid,
                              double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("mode_coverage_toy: eps must be > 0");
  if (outputs.size() != x_grid.size() || outputs.empty()) {
    throw std::invalid_argument("mode_coverage_toy: need one nonempty output list per grid point");
  }
  ToyCoverage cov;
  std::size_t phantom = 0, total = 0;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (outputs[i].empty()) throw std::invalid_argument("mode_coverage_toy: empty outputs");
    const Vec3 plus = toy_mode(x_grid[i], 1), minus = toy_mode(x_grid[i], -1);
    ToyPointCoverage p;
    for (const Vec3& y : outputs[i]) {
      const bool hp = std::hypot(y[0] - plus[0], y[1] - plus[1], y[2] - plus[2]) <= eps;
      const bool hm = std::hypot(y[0] - minus[0], y[1] - minus[1], y[2] - minus[2]) <= eps;
      p.plus = p.plus || hp;
      p.minus = p.minus || hm;
      if (!hp && !hm) ++p.phantom;
      ++p.total;
    }
    cov.plus_fraction += p.plus;
    cov.minus_fraction += p.minus;
    cov.both_fraction += p.plus && p.minus;
    phantom += p.phantom;
    total += p.total;
    cov.points.push_back(p);
  }
  const double n = static_cast<double>(x_grid.size());
  cov.plus_fraction /= n;
  cov.minus_fraction /= n;
  cov.both_fraction /= n;
  cov.phantom_fraction = static_cast<double>(phantom) / static_cast<double>(total);
  return cov;
}

double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("psnr: shape mismatch");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double l1_metric(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("l1_metric: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<std::size_t> single_link_clusters(std::size_t count,
                                              const std::function<double(std::size_t, std::size_t)>& distance,
                                              double threshold) {
  std::vector<std::size_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j)
      if (distance(i, j) <= threshold) parent[std::max(find(i), find(j))] = std::min(find(i), find(j));
  std::vector<std::size_t> id(count), remap(count, count);
  std::size_t next = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = find(i);
    if (remap[r] == count) remap[r] = next++;
    id[i] = remap[r];
  }
  return id;
}

}  // namespace ltrv
