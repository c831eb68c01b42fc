#include "ltrv/inference.hpp"

#include <algorithm>
#include <cmath>

namespace ltrv {

std::vector<double> momentum_step(const LatentCode& z_t, std::span<const double> r_prime, double rho) {
  if (r_prime.size() != z_t.dim()) throw TensorError("momentum_update: dimension mismatch");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw DegenerateInput("momentum_update: rho must be finite and >= 0");
  std::vector<double> d(z_t.dim());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = r_prime[k] - z_t[k];
  const double n = l2_norm(d);
  if (!std::isfinite(n)) throw DegenerateInput("momentum_update: non-finite r'");
  if (n < kFixedPointTolerance) return z_t.values();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = z_t[k] + rho * d[k] / n;
  return d;
}

LatentCode momentum_update(const LatentCode& z_t, std::span<const double> r_prime, double rho) {
  return project_sphere(momentum_step(z_t, r_prime, rho));
}

TraversalBatch traverse(const ModelBundle& model, const Encoding& enc, const Tensor& z0, std::size_t steps,
                        TraversalOptions options) {
  if (steps < 1) throw std::invalid_argument("traverse: at least one step is required");
  require_unit_rows(z0, "traverse");
  const std::size_t n = z0.dim(0);
  TraversalBatch out;
  out.traces.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.traces[i].restart = i;
    out.traces[i].z.push_back(LatentCode(row(z0, i)));
  }
  Tensor z = z0;
  if (options.keep_outputs) out.step_outputs.push_back(model.generate(enc, z));
  for (std::size_t t = 0; t < steps; ++t) {
    ZNetOutput zo = model.znet(z, enc.h);
    std::vector<std::vector<double>> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> r = row(zo.z_next_raw, i);
      const double rho = zo.rho[i];
      const LatentCode& cur = out.traces[i].z.back();
      LatentCode zn = options.rule == UpdateRule::Momentum ? momentum_update(cur, r, rho) : project_sphere(r);
      next[i] = zn.values();
      out.traces[i].rho.push_back(rho);
      out.traces[i].z.push_back(std::move(zn));
    }
    z = stack_rows(next);
    if (options.keep_outputs && t + 1 < steps) out.step_outputs.push_back(model.generate(enc, z));
  }
  out.outputs = model.generate(enc, z);
  if (options.keep_outputs) out.step_outputs.push_back(out.outputs);
  return out;
}

TraversalBatch multi_restart(const ModelBundle& model, const Tensor& x, std::size_t restarts, std::size_t steps,
                             Rng& rng, TraversalOptions options) {
  if (restarts < 1) throw std::invalid_argument("multi_restart: K must be >= 1");
  const Encoding enc = model.encode(x).repeat_rows(restarts);
  std::vector<std::vector<double>> starts;
  for (std::size_t i = 0; i < enc.batch(); ++i) starts.push_back(sample_sphere(model.zdim(), rng).values());
  TraversalBatch out = traverse(model, enc, stack_rows(starts), steps, options);
  for (std::size_t i = 0; i < out.traces.size(); ++i) out.traces[i].restart = i % restarts;
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LipschitzEstimate lipschitz_estimate(const LatentMap& g, std::size_t dim, std::size_t pairs, Rng& rng) {
  if (pairs < 1) throw std::invalid_argument("lipschitz_estimate: at least one pair is required");
  constexpr std::size_t kPoints = kChordInteriorPoints + 2;
  std::vector<double> pts;
  std::vector<std::size_t> used;
  for (std::size_t p = 0; p < pairs; ++p) {
    LatentCode a = sample_sphere(dim, rng), b = sample_sphere(dim, rng);
    if (a == b) continue;
    used.push_back(p);
    for (std::size_t k = 0; k < kPoints; ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(kPoints - 1);
      for (std::size_t j = 0; j < dim; ++j) pts.push_back(a[j] + s * (b[j] - a[j]));
    }
  }
  LipschitzEstimate est;
  if (used.empty()) return est;
  const std::size_t m = used.size() * kPoints;
  const Tensor z({m, dim}, pts);
  const Tensor y = g(z);
  const std::size_t stride = y.numel() / y.dim(0);
  for (std::size_t c = 0; c < used.size(); ++c) {
    for (std::size_t k = 0; k + 1 < kPoints; ++k) {
      const std::size_t i = c * kPoints + k;
      double dy = 0.0, dz = 0.0;
      for (std::size_t j = 0; j < stride; ++j) dy += std::pow(y[(i + 1) * stride + j] - y[i * stride + j], 2);
      for (std::size_t j = 0; j < dim; ++j) dz += std::pow(z[(i + 1) * dim + j] - z[i * dim + j], 2);
      if (dz > 0.0) est.ratios.push_back(std::sqrt(dy / dz));
    }
  }
  if (est.ratios.empty()) return est;
  est.max = *std::max_element(est.ratios.begin(), est.ratios.end());
  est.p50 = percentile(est.ratios, 0.5);
  est.p90 = percentile(est.ratios, 0.9);
  est.p99 = percentile(est.ratios, 0.99);
  return est;
}

LipschitzEstimate lipschitz_estimate(const ModelBundle& model, const Tensor& x, std::size_t pairs, Rng& rng) {
  if (x.dim(0) != 1) throw TensorError("lipschitz_estimate: expects a single input row");
  const Encoding enc = model.encode(x);
  LatentMap g = [&](const Tensor& z) { return model.generate_unchecked(enc.repeat_rows(z.dim(0)), z); };
  return lipschitz_estimate(g, model.zdim(), pairs, rng);
}

}  // namespace ltrv
