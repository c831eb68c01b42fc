#include "ltrv/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace ltrv {
namespace {

Tensor mean_abs(const Tensor& t) { return scale(abs_sum(t), 1.0 / static_cast<double>(t.numel())); }

Tensor noise_like(const Tensor& t, double sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> v(t.numel());
  for (double& x : v) x = normal(rng);
  return Tensor(t.shape(), std::move(v));
}

void require_finite_loss(double v, const char* what) {
  if (!std::isfinite(v)) throw DivergenceError(std::string(what) + ": non-finite loss");
}

std::vector<double> row_l1(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), stride = a.numel() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < stride; ++k) s += std::abs(a[r * stride + k] - b[r * stride + k]);
    out[r] = s / static_cast<double>(stride);
  }
  return out;
}

void write_back(Net& net, std::vector<Tensor>::const_iterator first) {
  for (Tensor& p : net.params) p = *first++;
}

}  // namespace

void TrainConfig::validate() const {
  if (inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (alpha_l < 0.0) throw std::invalid_argument("alpha_l must be >= 0");
  if (sigma_e < 0.0) throw std::invalid_argument("sigma_e must be >= 0");
  if (!(hist.tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  if (hist.bins < 1) throw std::invalid_argument("bins must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (huber_delta < 0.0) throw std::invalid_argument("huber_delta must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

Tensor cost_l1(const Tensor& y_g, const Tensor& y) {
  if (y_g.shape() != y.shape()) {
    throw TensorError("cost_l1: shape mismatch " + shape_string(y_g.shape()) + " vs " + shape_string(y.shape()));
  }
  return mean_abs(sub(y_g, y));
}

Tensor cost_color_kl(const Tensor& a, const Tensor& b, const Tensor& a_gt, const Tensor& b_gt, double lambda,
                     SoftHistogram hist) {
  if (lambda < 0.0) throw std::invalid_argument("cost_color_kl: lambda must be >= 0");
  Tensor e = add(cost_l1(a_gt, a), cost_l1(b_gt, b));
  if (lambda == 0.0) return e;
  return add(e, scale(add(kl_to_uniform_hist(a, hist), kl_to_uniform_hist(b, hist)), lambda));
}

InnerStep z_inner_step(const ModelBundle& model, const Encoding& enc, const Tensor& z_t, const Tensor& y_g,
                       double beta, double alpha, double huber_delta) {
  require_unit_rows(z_t, "z_inner_step");
  Tape tape;
  Tensor z = tape.leaf(z_t);
  Tensor out = model.generate_unchecked(enc, z);
  Tensor r = sub(out, y_g);
  const double per_row = static_cast<double>(r.numel() / r.dim(0));
  // Rows are independent, so the summed cost gives each row its own gradient.
  Tensor e = scale(huber_delta > 0.0 ? huber_sum(r, huber_delta) : abs_sum(r), 1.0 / per_row);
  const Tensor g = tape.backward(e)[z];

  const std::size_t n = z_t.dim(0), d = z_t.dim(1);
  std::vector<double> next(n * d);
  InnerStep step{Tensor(), std::vector<double>(n), row_l1(out, y_g)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) {
      v[k] = z_t[i * d + k] - beta * g[i * d + k];
      if (!std::isfinite(v[k])) throw DivergenceError("z_inner_step: non-finite gradient");
    }
    LatentCode zn = project_sphere(v);
    double dist = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      next[i * d + k] = zn[k];
      dist += (zn[k] - z_t[i * d + k]) * (zn[k] - z_t[i * d + k]);
    }
    step.rho_target[i] = alpha * std::sqrt(dist);
  }
  step.z_next = Tensor({n, d}, std::move(next));
  return step;
}

ZLoss znet_regression_step(ModelBundle& model, AdamState& state, const Tensor& z_t, const Tensor& h,
                           const Tensor& z_next, const Tensor& rho_target, double sigma_e, double alpha_l, Rng& rng) {
  Tape tape;
  std::vector<Tensor> params = model.Z.attach(tape);
  ZNetOutput out = model.znet(z_t, h);
  Tensor loss = add(cost_l1(out.z_next_raw, z_next), cost_l1(out.rho, rho_target));
  Tensor penalty;
  if (sigma_e > 0.0 && alpha_l > 0.0) {
    ZNetOutput noisy = model.znet(add(z_t, noise_like(z_t, sigma_e, rng)), add(h, noise_like(h, sigma_e, rng)));
    penalty = scale(add(cost_l1(noisy.z_next_raw, out.z_next_raw), cost_l1(noisy.rho, out.rho)), alpha_l);
    loss = add(loss, penalty);
  }
  ZLoss result{loss.item(), penalty.numel() ? penalty.item() : 0.0};
  require_finite_loss(result.total, "znet_regression_step");
  Gradients g = tape.backward(loss);
  std::vector<Tensor> grads;
  for (const Tensor& p : params) grads.push_back(g[p]);
  adam_step(params, grads, state);
  write_back(model.Z, params.cbegin());
  return result;
}

OuterResult outer_step(ModelBundle& model, AdamState& state, const Tensor& x, const Tensor& y, const Tensor& z,
                       double sigma_e, double alpha_l, Rng& rng) {
  require_unit_rows(z, "outer_step");
  Tape tape;
  std::vector<Tensor> params = model.H.attach(tape);
  std::vector<Tensor> gparams = model.G.attach(tape);
  params.insert(params.end(), gparams.begin(), gparams.end());

  Encoding enc = model.encode(x, NormMode::Training);
  Tensor out = model.generate_unchecked(enc, z, NormMode::Training);
  Tensor cost = cost_l1(out, y);
  OuterResult result{cost.item(), 0.0, row_l1(out, y)};
  Tensor loss = cost;
  if (sigma_e > 0.0 && alpha_l > 0.0) {
    Encoding noisy = enc;
    noisy.h = add(enc.h, noise_like(enc.h, sigma_e, rng));
    Tensor zn = add(z, noise_like(z, sigma_e, rng));
    Tensor penalty = scale(cost_l1(model.generate_unchecked(noisy, zn, NormMode::Training), out), alpha_l);
    result.penalty = penalty.item();
    loss = add(loss, penalty);
  }
  require_finite_loss(loss.item(), "outer_step");
  Gradients g = tape.backward(loss);
  std::vector<Tensor> grads;
  for (const Tensor& p : params) grads.push_back(g[p]);
  adam_step(params, grads, state);
  write_back(model.H, params.cbegin());
  write_back(model.G, params.cbegin() + static_cast<std::ptrdiff_t>(model.H.params.size()));
  return result;
}

void RunLog::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  char buf[256];
  for (const StepRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.key.to_string().c_str(), r.E,
                  r.dz_norm, r.rho_target, r.z_loss, r.ms);
    out << buf;
  }
}

std::vector<double> RunLog::epoch_means() const {
  std::vector<double> sum, count;
  for (const StepRecord& r : records) {
    if (r.epoch >= sum.size()) {
      sum.resize(r.epoch + 1, 0.0);
      count.resize(r.epoch + 1, 0.0);
    }
    sum[r.epoch] += r.E;
    count[r.epoch] += 1.0;
  }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = count[i] > 0 ? sum[i] / count[i] : 0.0;
  return sum;
}

TrainResult train(const TrainConfig& config, const ArchConfig& arch, const DataSource& data,
                  const std::function<void(const EpochSummary&)>& on_epoch) {
  config.validate();
  using Clock = std::chrono::steady_clock;
  Rng rng(config.seed);
  TrainResult result{ModelBundle::create(arch, rng), LatentTable(arch.zdim), {}};
  ModelBundle& model = result.model;
  AdamState gh_state(config.adam), z_state(config.adam);

  double reference = 0.0;
  int over = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    SampleSet set = data(epoch);
    const std::size_t n = set.keys.size();
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    if (set.x.dim(0) != n || set.y.dim(0) != n) throw std::invalid_argument("train: x, y and keys differ in length");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const auto batch_start = Clock::now();
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + config.batch_size)));
      const Tensor xb = gather_rows(set.x, idx), yb = gather_rows(set.y, idx);
      std::vector<std::vector<double>> rows, fresh;
      for (std::size_t i : idx) rows.push_back(result.table.get_or_init(set.keys[i], rng).values());
      if (config.explore) {
        std::normal_distribution<double> normal(0.0, config.explore_sigma);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          if (config.explore_sigma > 0.0) {
            std::vector<double> v = rows[k];
            for (double& c : v) c += normal(rng);
            fresh.push_back(project_sphere(v).values());
          } else {
            fresh.push_back(sample_sphere(arch.zdim, rng).values());
          }
        }
      }

      const Encoding enc = static_cast<const ModelBundle&>(model).encode(xb);
      Tensor z = stack_rows(rows), ze = config.explore ? stack_rows(fresh) : Tensor();
      InnerStep last;
      double z_loss = 0.0;
      for (std::size_t t = 0; t < config.inner_steps; ++t) {
        last = z_inner_step(model, enc, z, yb, config.beta, config.alpha, config.huber_delta);
        Tensor rho({idx.size(), 1}, last.rho_target);
        z_loss += znet_regression_step(model, z_state, z, enc.h, last.z_next, rho, config.sigma_e, config.alpha_l, rng)
                      .total;
        z = last.z_next;
        if (config.explore) {
          InnerStep s = z_inner_step(model, enc, ze, yb, config.beta, config.alpha, config.huber_delta);
          znet_regression_step(model, z_state, ze, enc.h, s.z_next, Tensor({idx.size(), 1}, s.rho_target),
                               config.sigma_e, config.alpha_l, rng);
          ze = s.z_next;
        }
      }
      for (std::size_t k = 0; k < idx.size(); ++k) result.table.update(set.keys[idx[k]], row(z, k));

      OuterResult outer = outer_step(model, gh_state, xb, yb, z, config.sigma_e, config.alpha_l, rng);
      const double ms =
          config.log_timing ? std::chrono::duration<double, std::milli>(Clock::now() - batch_start).count() : 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double dz = last.rho_target[k] / config.alpha;
        result.log.records.push_back(StepRecord{epoch, set.keys[idx[k]], outer.row_cost[k], dz, last.rho_target[k],
                                                z_loss / static_cast<double>(config.inner_steps), ms});
        epoch_sum += outer.row_cost[k];
      }
    }

    const double mean_E = epoch_sum / static_cast<double>(n);
    if (!std::isfinite(mean_E)) throw DivergenceError("train: non-finite cost in epoch " + std::to_string(epoch));
    if (epoch == 0) reference = mean_E;
    over = mean_E > 10.0 * reference ? over + 1 : 0;
    if (over >= 3) {
      throw DivergenceError("train: cost above 10x its first-epoch value for 3 consecutive epochs (epoch " +
                            std::to_string(epoch) + ")");
    }
    if (on_epoch) {
      on_epoch(EpochSummary{epoch, mean_E, std::chrono::duration<double>(Clock::now() - epoch_start).count()});
    }
  }
  return result;
}

}  // namespace ltrv
