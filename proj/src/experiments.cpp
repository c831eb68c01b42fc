#include "ltrv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ltrv {

TrainConfig toy_train_config() {
  TrainConfig c;
  c.epochs = 30;
  c.inner_steps = 20;
  c.beta = 0.05;
  c.alpha = 1.0;
  c.alpha_l = 0.1;
  c.sigma_e = 0.01;
  c.batch_size = 20;
  c.huber_delta = 0.1;
  c.explore = true;
  c.explore_sigma = 0.6;
  return c;
}

ToyDataset make_toy_data(const ToyDataConfig& data) {
  Rng rng(data.data_seed);
  if (!data.paired) return toy_generate(data.n_train, data.x_lo, data.x_hi, data.p_plus, rng);
  if (data.n_train < 2 || data.n_train % 2) throw std::invalid_argument("paired toy data needs an even n_train >= 2");
  ToyDataset d = toy_generate(data.n_train / 2, data.x_lo, data.x_hi, data.p_plus, rng);
  const std::size_t half = d.size();
  for (std::size_t i = 0; i < half; ++i) {
    d.x.push_back(d.x[i]);
    d.sign.push_back(-d.sign[i]);
    d.y.push_back(toy_mode(d.x[i], -d.sign[i]));
  }
  return d;
}

TrainResult train_toy(const TrainConfig& config, const ToyDataConfig& data, const ArchConfig& arch,
                      const std::function<void(const EpochSummary&)>& on_epoch) {
  const SampleSet set = make_toy_data(data).to_samples();
  return train(config, arch, [&set](std::size_t) { return set; }, on_epoch);
}

namespace {

Vec3 as_vec3(const Tensor& t, std::size_t r) { return {t[r * 3], t[r * 3 + 1], t[r * 3 + 2]}; }

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

}  // namespace

ToyEvaluation evaluate_toy(const ModelBundle& model, const ToyEvalConfig& config) {
  if (model.config().arch != Arch::Toy) throw std::invalid_argument("evaluate_toy: toy model required");
  const std::vector<double> grid = linspace(config.x_lo, config.x_hi, config.grid_points);
  const std::size_t k = config.restarts;
  Rng rng(config.seed);
  const Tensor x({grid.size(), 1}, grid);
  TraversalBatch run = multi_restart(model, x, k, config.steps, rng, TraversalOptions{config.rule, true});

  ToyEvaluation ev;
  ev.outputs.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t r = 0; r < k; ++r) ev.outputs[i].push_back(as_vec3(run.outputs, i * k + r));
  ev.coverage = mode_coverage_toy(ev.outputs, grid, config.eps);

  std::size_t mono = 0, endpoint = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t r = i * k;
    bool ok = true;
    double prev = distance_to_nearest_mode(as_vec3(run.step_outputs[0], r), grid[i]);
    const double first = prev;
    for (std::size_t t = 1; t < run.step_outputs.size(); ++t) {
      const double d = distance_to_nearest_mode(as_vec3(run.step_outputs[t], r), grid[i]);
      ok = ok && d <= prev + 1e-12;
      prev = d;
    }
    mono += ok;
    endpoint += prev <= first + 1e-12;
  }
  ev.monotone_fraction = static_cast<double>(mono) / static_cast<double>(grid.size());
  ev.endpoint_fraction = static_cast<double>(endpoint) / static_cast<double>(grid.size());

  // rho at the codes the traversal converged to versus fresh random codes.
  const Encoding enc = model.encode(x).repeat_rows(k);
  std::vector<std::vector<double>> ends, randoms;
  for (const TraversalTrace& tr : run.traces) ends.push_back(tr.z.back().values());
  for (std::size_t i = 0; i < ends.size(); ++i) randoms.push_back(sample_sphere(model.zdim(), rng).values());
  const Tensor rho_end = model.znet(stack_rows(ends), enc.h).rho;
  const Tensor rho_rand = model.znet(stack_rows(randoms), enc.h).rho;
  ev.rho_converged_median = median(rho_end.to_vector());
  ev.rho_random_median = median(rho_rand.to_vector());
  return ev;
}

std::pair<double, double> rho_table_vs_random(const ModelBundle& model, const LatentTable& table,
                                              const ToyDataset& data, Rng& rng) {
  const SampleSet set = data.to_samples();
  const Encoding enc = model.encode(set.x);
  std::vector<std::vector<double>> learned, randoms;
  for (const SampleKey& key : set.keys) {
    learned.push_back(table.get(key).values());
    randoms.push_back(sample_sphere(model.zdim(), rng).values());
  }
  return {median(model.znet(stack_rows(learned), enc.h).rho.to_vector()),
          median(model.znet(stack_rows(randoms), enc.h).rho.to_vector())};
}

ModelBundle train_l1_baseline(const TrainConfig& config, const ToyDataConfig& data) {
  config.validate();
  const SampleSet set = make_toy_data(data).to_samples();
  Rng rng(config.seed);
  ModelBundle model = ModelBundle::create(ArchConfig{}, rng);
  AdamState state(config.adam);
  const std::size_t n = set.keys.size();
  std::vector<double> e1(model.zdim(), 0.0);
  e1[0] = 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + config.batch_size)));
      const Tensor z = stack_rows(std::vector<std::vector<double>>(idx.size(), e1));
      outer_step(model, state, gather_rows(set.x, idx), gather_rows(set.y, idx), z, 0.0, 0.0, rng);
    }
  }
  return model;
}

std::vector<UncertaintyPoint> uncertainty_curve(const ModelBundle& model, const std::vector<double>& xs, double delta,
                                                std::size_t passes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<UncertaintyPoint> out;
  for (double x : xs) {
    const Tensor xt({1, 1}, {x});
    const TraversalBatch run = multi_restart(model, xt, 1, kDefaultInferenceSteps, rng);
    out.push_back({x, uncertainty(model, xt, run.traces[0].z.back(), delta, passes, rng).mean_variance()});
  }
  return out;
}

std::vector<LipschitzPoint> lipschitz_curve(const ModelBundle& model, const std::vector<double>& xs,
                                            std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LipschitzPoint> out;
  for (double x : xs) out.push_back({x, lipschitz_estimate(model, Tensor({1, 1}, {x}), pairs, rng)});
  return out;
}

ZdimResult ablate_zdim(const TrainConfig& config, const ToyDataConfig& data, std::size_t zdim) {
  ArchConfig arch;
  arch.zdim = zdim;
  const TrainResult trained = train_toy(config, data, arch);
  ZdimResult r;
  r.zdim = zdim;
  r.final_E = trained.log.epoch_means().back();
  Rng rng(config.seed + 1);
  const std::vector<double> xs = linspace(0.05, 0.95, 10);
  for (double x : xs) {
    const TraversalBatch run = multi_restart(trained.model, Tensor({1, 1}, {x}), kDiversitySamples,
                                             kDefaultInferenceSteps, rng);
    std::vector<std::vector<double>> samples;
    for (std::size_t k = 0; k < kDiversitySamples; ++k) samples.push_back(row(run.outputs, k));
    r.diversity += diversity_score(samples) / static_cast<double>(xs.size());
  }
  return r;
}

namespace {

// Largest eigenvalue of the Gram matrix of the columns of a [r, c] tensor.
double gram_top_eigenvalue(const Tensor& a) {
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> v(c, 1.0), av(r), w(c);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (std::size_t i = 0; i < r; ++i) {
      av[i] = 0.0;
      for (std::size_t j = 0; j < c; ++j) av[i] += a[i * c + j] * v[j];
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) w[j] += a[i * c + j] * av[i];
    lambda = l2_norm(w);
    if (lambda == 0.0) return 0.0;
    for (std::size_t j = 0; j < c; ++j) v[j] = w[j] / lambda;
  }
  return lambda;
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> t(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return Tensor({c, r}, t);
}

}  // namespace

std::vector<double> surrogate_descent(std::size_t rounds, std::size_t z_steps, std::uint64_t seed) {
  constexpr std::size_t n = 40, d = 4, m = 6;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto gaussian = [&](Shape s) {
    std::vector<double> v(shape_numel(s));
    for (double& x : v) x = g(rng);
    return Tensor(std::move(s), v);
  };
  Tensor z = gaussian({n, d}), w = gaussian({d, m});
  const Tensor y = gaussian({n, m});
  const double inv_n = 1.0 / static_cast<double>(n);
  auto energy = [&](const Tensor& zz, const Tensor& ww) { return scale(square_sum(sub(matmul(zz, ww), y)), inv_n); };
  auto step = [](const Tensor& p, const Tensor& grad, double lr) {
    std::vector<double> v = p.to_vector();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * grad[i];
    return Tensor(p.shape(), v);
  };

  std::vector<double> history{energy(z, w).item()};
  for (std::size_t r = 0; r < rounds; ++r) {
    const double lz = 2.0 * inv_n * gram_top_eigenvalue(transpose(w));
    for (std::size_t s = 0; s < z_steps; ++s) {
      Tape tape;
      const Tensor zl = tape.leaf(z);
      z = step(z, tape.backward(energy(zl, w))[zl], 1.0 / lz);
    }
    const double lw = 2.0 * inv_n * gram_top_eigenvalue(z);
    Tape tape;
    const Tensor wl = tape.leaf(w);
    w = step(w, tape.backward(energy(z, wl))[wl], 1.0 / lw);
    history.push_back(energy(z, w).item());
  }
  return history;
}

TrainConfig image_train_config() {
  TrainConfig c;
  c.epochs = 4;
  c.inner_steps = 20;
  // The image cost averages over 1024 pixels, so its z gradient is far smaller than the
  // toy's; 30 gives steps of ~0.05 on the sphere, close to the toy's.
  c.beta = 30.0;
  c.alpha = 1.0;
  c.batch_size = 20;
  c.huber_delta = 0.1;
  c.explore = true;
  c.explore_sigma = 0.6;
  return c;
}

ArchConfig image_arch_config() {
  ArchConfig a;
  a.arch = Arch::Image32;
  a.zdim = 8;
  return a;
}

CorruptionSpec two_mode_corruption(std::uint64_t seed) {
  CorruptionSpec s;
  s.overlap_rate = 0.0;
  s.p_box = 0.3;
  s.mask_covers_box = true;
  s.seed = seed;
  return s;
}

ImageSet image_subset(const ImageSet& set, std::size_t begin, std::size_t count) {
  if (begin + count > set.size()) throw std::out_of_range("image_subset: range exceeds the set");
  ImageSet out;
  out.images.assign(set.images.begin() + static_cast<std::ptrdiff_t>(begin),
                    set.images.begin() + static_cast<std::ptrdiff_t>(begin + count));
  if (!set.labels.empty()) {
    out.labels.assign(set.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      set.labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
  }
  return out;
}

TwoModeResult evaluate_two_mode(const ModelBundle& model, const CorruptedBatch& probe, std::size_t restarts,
                                std::size_t steps, Rng& rng, double threshold, const Box& box) {
  const std::size_t n = probe.masks.size();
  TwoModeResult res;
  std::size_t hits = 0, split = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor x = slice_rows(probe.inputs, i, 1);
    const TraversalBatch run = multi_restart(model, x, restarts, steps, rng);
    const MaskRegion m = probe.masks[i];
    const std::size_t lo = m.row * kImageSide, hi = (m.row + m.height) * kImageSide;
    std::vector<std::vector<double>> region(restarts);
    for (std::size_t k = 0; k < restarts; ++k)
      for (std::size_t p = lo; p < hi; ++p) region[k].push_back(run.outputs[k * kImagePixels + p]);
    auto l1 = [](const std::vector<double>& a, const std::vector<double>& b) { return l1_metric(a, b); };
    const std::vector<std::size_t> id =
        single_link_clusters(restarts, [&](std::size_t a, std::size_t b) { return l1(region[a], region[b]); }, threshold);
    const std::size_t groups = *std::max_element(id.begin(), id.end()) + 1;
    std::vector<std::vector<double>> center(groups, std::vector<double>(hi - lo, 0.0));
    std::vector<std::size_t> size(groups, 0);
    for (std::size_t k = 0; k < restarts; ++k) {
      ++size[id[k]];
      for (std::size_t p = 0; p < hi - lo; ++p) center[id[k]][p] += region[k][p];
    }
    std::vector<std::size_t> big;
    for (std::size_t g = 0; g < groups; ++g) {
      for (double& v : center[g]) v /= static_cast<double>(size[g]);
      if (size[g] >= 2) big.push_back(g);
    }
    // Clusters whose center is farther than the threshold from every earlier kept center.
    std::vector<std::size_t> kept;
    for (std::size_t g : big) {
      bool far = true;
      for (std::size_t h : kept) far = far && l1(center[g], center[h]) > threshold;
      if (far) kept.push_back(g);
    }
    res.clusters.push_back(kept.size());
    hits += kept.size() >= 2;

    std::size_t lit = 0;
    for (std::size_t k = 0; k < restarts; ++k) {
      double sum = 0.0;
      for (std::size_t r = 0; r < box.size; ++r)
        for (std::size_t c = 0; c < box.size; ++c)
          sum += run.outputs[k * kImagePixels + (box.row + r) * kImageSide + box.col + c];
      lit += sum > 0.0;
    }
    split += lit >= 2 && restarts - lit >= 2;
  }
  res.fraction = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  res.box_split = n ? static_cast<double>(split) / static_cast<double>(n) : 0.0;
  return res;
}

}  // namespace ltrv
