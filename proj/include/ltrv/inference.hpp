#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ltrv/latent.hpp"
#include "ltrv/networks.hpp"

namespace ltrv {

inline constexpr std::size_t kDefaultInferenceSteps = 20;
/// Below this |r' - z_t| the momentum update leaves z_t in place.
inline constexpr double kFixedPointTolerance = 1e-9;

enum class UpdateRule {
  Momentum,  // z + rho * (r' - z) / |r' - z|, then projection
  Direct,    // projection of r' itself ("w/o rho")
};

/// z_t + rho (r' - z_t) / |r' - z_t| before projection; z_t itself at the fixed point.
std::vector<double> momentum_step(const LatentCode& z_t, std::span<const double> r_prime, double rho);
/// One momentum-scaled step followed by projection onto the sphere.
LatentCode momentum_update(const LatentCode& z_t, std::span<const double> r_prime, double rho);

struct TraversalTrace {
  std::size_t restart = 0;
  std::vector<LatentCode> z;   // z_0 .. z_N
  std::vector<double> rho;     // rho_hat at steps 0 .. N-1
};

struct TraversalOptions {
  UpdateRule rule = UpdateRule::Momentum;
  /// Keep the generator output after every step, not only the last.
  bool keep_outputs = false;
};

struct TraversalBatch {
  std::vector<TraversalTrace> traces;
  Tensor outputs;                     // generator output at z_N, one row per trace
  std::vector<Tensor> step_outputs;   // outputs at z_0 .. z_N when requested
};

/// Runs `steps` updates for every row of z0 against the matching row of enc.
TraversalBatch traverse(const ModelBundle& model, const Encoding& enc, const Tensor& z0, std::size_t steps,
                        TraversalOptions options = {});

/// K traversals per input row from fresh sphere samples. Row i*K + k of the
/// result belongs to input i, restart k.
TraversalBatch multi_restart(const ModelBundle& model, const Tensor& x, std::size_t restarts, std::size_t steps,
                             Rng& rng, TraversalOptions options = {});

struct LipschitzEstimate {
  double max = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  std::vector<double> ratios;
};

/// Maps a [M, d] batch of latent points to [M, ...] outputs.
using LatentMap = std::function<Tensor(const Tensor&)>;

inline constexpr std::size_t kChordInteriorPoints = 10;

/// Ratios |G(p_{k+1}) - G(p_k)| / |p_{k+1} - p_k| along straight chords
/// between `pairs` random sphere pairs, each cut by 10 interior points.
LipschitzEstimate lipschitz_estimate(const LatentMap& g, std::size_t dim, std::size_t pairs, Rng& rng);
/// Same for the generator at one input x (a single row).
LipschitzEstimate lipschitz_estimate(const ModelBundle& model, const Tensor& x, std::size_t pairs, Rng& rng);

/// Linear interpolation percentile of unsorted values, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace ltrv
