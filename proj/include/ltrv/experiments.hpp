#pragma once

#include <cstdint>
#include <vector>

#include "ltrv/datasets.hpp"
#include "ltrv/inference.hpp"
#include "ltrv/metrics.hpp"
#include "ltrv/training.hpp"

namespace ltrv {

struct ToyDataConfig {
  std::size_t n_train = 2000;
  double x_lo = 0.0;
  double x_hi = 1.0;
  double p_plus = 0.5;
  std::uint64_t data_seed = 1;
  /// Draw n_train / 2 inputs and keep each with both signs, so the modes are
  /// balanced at every x rather than only in expectation. Ignores p_plus.
  bool paired = false;
};

ToyDataset make_toy_data(const ToyDataConfig& data);

/// Default toy training recipe.
TrainConfig toy_train_config();

TrainResult train_toy(const TrainConfig& config, const ToyDataConfig& data, const ArchConfig& arch = {},
                      const std::function<void(const EpochSummary&)>& on_epoch = {});

struct ToyEvalConfig {
  std::size_t grid_points = 200;
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::size_t restarts = 64;
  std::size_t steps = kDefaultInferenceSteps;
  double eps = 0.3;
  UpdateRule rule = UpdateRule::Momentum;
  std::uint64_t seed = 0;
};

struct ToyEvaluation {
  ToyCoverage coverage;
  /// Grid points whose first traversal gets no farther from the nearest mode at any step.
  double monotone_fraction = 0.0;
  /// Grid points whose first traversal ends no farther than it started.
  double endpoint_fraction = 0.0;
  double rho_converged_median = 0.0;
  double rho_random_median = 0.0;
  /// Final outputs per grid point.
  std::vector<std::vector<Vec3>> outputs;
};

ToyEvaluation evaluate_toy(const ModelBundle& model, const ToyEvalConfig& config);

/// Median rho_hat at the learned table codes versus fresh sphere codes for the same inputs.
std::pair<double, double> rho_table_vs_random(const ModelBundle& model, const LatentTable& table,
                                              const ToyDataset& data, Rng& rng);

/// Trains the same H, G stack with plain L1 and no latent code (z fixed to e_1).
ModelBundle train_l1_baseline(const TrainConfig& config, const ToyDataConfig& data);

// ------------------------------------------------------- toy diagnostics

struct UncertaintyPoint {
  double x = 0.0;
  double mean_variance = 0.0;
};

inline constexpr double kUncertaintyDelta = 0.3;

/// Per x, the code at the end of one traversal from a random start is the
/// center of `passes` perturbed codes.
std::vector<UncertaintyPoint> uncertainty_curve(const ModelBundle& model, const std::vector<double>& xs, double delta,
                                                std::size_t passes, std::uint64_t seed);

struct LipschitzPoint {
  double x = 0.0;
  LipschitzEstimate estimate;
};

std::vector<LipschitzPoint> lipschitz_curve(const ModelBundle& model, const std::vector<double>& xs,
                                            std::size_t pairs, std::uint64_t seed);

struct ZdimResult {
  std::size_t zdim = 0;
  double final_E = 0.0;    // mean training cost over the last epoch
  double diversity = 0.0;  // averaged over a 10-point x grid, 20 restarts each
};

ZdimResult ablate_zdim(const TrainConfig& config, const ToyDataConfig& data, std::size_t zdim);

/// Alternating gradient descent on E(Z, W) = |Z W - Y|^2 / N with free codes
/// Z [N, d] and a linear generator W [d, m]. Each round takes `z_steps` code
/// steps then one W step, both with step 1/lambda_max of the block Hessian.
/// Returns E before the first round and after every round.
std::vector<double> surrogate_descent(std::size_t rounds, std::size_t z_steps, std::uint64_t seed);

// ------------------------------------------------------- two-mode images

/// Default image recipe (desk scale).
TrainConfig image_train_config();
ArchConfig image_arch_config();

/// White-box experiment corruption: alternate mode at rate 0.3, no overlap.
CorruptionSpec two_mode_corruption(std::uint64_t seed);

ImageSet image_subset(const ImageSet& set, std::size_t begin, std::size_t count);

struct TwoModeResult {
  /// Inputs with at least two clusters of >= 2 outputs whose centers differ by > threshold.
  double fraction = 0.0;
  std::vector<std::size_t> clusters;  // qualifying clusters per input
  /// Inputs where at least two outputs show the box (mean > 0 over it) and at least two do not.
  double box_split = 0.0;
};

inline constexpr double kTwoModeThreshold = 0.15;

/// Multi-restart on every probe input; outputs are compared by mean absolute
/// difference over the masked rows, in model units.
TwoModeResult evaluate_two_mode(const ModelBundle& model, const CorruptedBatch& probe, std::size_t restarts,
                                std::size_t steps, Rng& rng, double threshold = kTwoModeThreshold,
                                const Box& box = Box{});

}  // namespace ltrv
