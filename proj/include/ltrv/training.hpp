#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltrv/adam.hpp"
#include "ltrv/latent.hpp"
#include "ltrv/networks.hpp"

namespace ltrv {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t inner_steps = 20;
  double beta = 0.05;
  double alpha = 1.0;
  double alpha_l = 0.1;
  double sigma_e = 0.01;
  AdamConfig adam;
  std::size_t batch_size = 20;
  /// Color-loss KL weight and its histogram (colorization cost only).
  double lambda = 0.0;
  SoftHistogram hist;
  /// Width of the quadratic zone of the z-step cost; 0 gives plain L1.
  double huber_delta = 0.1;
  /// Also fit Z on trajectories started from fresh sphere samples.
  bool explore = true;
  /// Exploration starts: 0 draws fresh sphere codes, > 0 perturbs the sample's own code.
  double explore_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Fill the ms column with wall time. Off keeps logs byte-reproducible.
  bool log_timing = false;

  void validate() const;
};

/// Mean absolute deviation.
Tensor cost_l1(const Tensor& y_g, const Tensor& y);

/// |a_gt - a| + |b_gt - b| (means) + lambda * (KL(a) + KL(b)) against the uniform law.
Tensor cost_color_kl(const Tensor& a, const Tensor& b, const Tensor& a_gt, const Tensor& b_gt, double lambda,
                     SoftHistogram hist);

struct InnerStep {
  Tensor z_next;                    // [N, zdim], unit rows
  std::vector<double> rho_target;   // alpha * |z_next - z_t| per row
  std::vector<double> energy;       // per-row L1 cost at z_t
};

/// One projected gradient step on the per-row cost w.r.t. z. `enc` must be
/// off-tape; normalization layers use running statistics.
InnerStep z_inner_step(const ModelBundle& model, const Encoding& enc, const Tensor& z_t, const Tensor& y_g,
                       double beta, double alpha, double huber_delta);

struct ZLoss {
  double total = 0.0;
  double penalty = 0.0;
};

/// One Adam step on Z towards (z_next, rho_target) from (z_t, h).
ZLoss znet_regression_step(ModelBundle& model, AdamState& state, const Tensor& z_t, const Tensor& h,
                           const Tensor& z_next, const Tensor& rho_target, double sigma_e, double alpha_l, Rng& rng);

struct OuterResult {
  double cost = 0.0;
  double penalty = 0.0;
  std::vector<double> row_cost;
};

/// One Adam step on H and G with the latent codes `z` held fixed.
OuterResult outer_step(ModelBundle& model, AdamState& state, const Tensor& x, const Tensor& y, const Tensor& z,
                       double sigma_e, double alpha_l, Rng& rng);

struct StepRecord {
  std::size_t epoch = 0;
  SampleKey key;
  double E = 0.0;
  double dz_norm = 0.0;
  double rho_target = 0.0;
  double z_loss = 0.0;
  double ms = 0.0;
};

struct RunLog {
  std::vector<StepRecord> records;

  static constexpr const char* kHeader = "epoch,sample,E,dz_norm,rho_target,z_loss,ms";
  void write_csv(std::ostream& out) const;
  /// Mean E per epoch.
  std::vector<double> epoch_means() const;
};

/// Inputs, targets and latent keys for one epoch; row i of x and y belongs to keys[i].
struct SampleSet {
  Tensor x;
  Tensor y;
  std::vector<SampleKey> keys;
};

using DataSource = std::function<SampleSet(std::size_t epoch)>;

struct TrainResult {
  ModelBundle model;
  LatentTable table;
  RunLog log;
};

struct EpochSummary {
  std::size_t epoch = 0;
  double mean_E = 0.0;
  double seconds = 0.0;
};

/// Alternating optimization: per batch, inner_steps z updates each followed by
/// a Z regression step, then one H/G step. Deterministic given config.seed.
TrainResult train(const TrainConfig& config, const ArchConfig& arch, const DataSource& data,
                  const std::function<void(const EpochSummary&)>& on_epoch = {});

}  // namespace ltrv
