#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ltrv/checkpoint.hpp"
#include "ltrv/latent.hpp"
#include "ltrv/ops.hpp"
#include "ltrv/tape.hpp"

namespace ltrv {

enum class Arch { Toy, Image32 };

std::string arch_name(Arch arch);
Arch parse_arch(const std::string& name);

struct ArchConfig {
  Arch arch = Arch::Toy;
  std::size_t zdim = 3;
  /// Toy MLP hidden width.
  std::size_t hidden = 32;
  /// Toy output y = output_scale * tanh(.).
  double output_scale = 5.0;

  /// Bottleneck width: 8 for the toy MLP, 128 for the image stack.
  std::size_t hdim() const { return arch == Arch::Toy ? 8 : 128; }
  /// Flattened generator output size: 3 for the toy, 32*32 for images.
  std::size_t output_size() const { return arch == Arch::Toy ? 3 : 32 * 32; }
};

/// Parameters (and normalization statistics) of one of H, G or Z.
struct Net {
  std::vector<std::string> names;
  std::vector<Tensor> params;
  std::vector<std::string> norm_names;
  std::vector<NormStats> norms;

  /// Replaces every parameter by a leaf of `tape` and returns the leaves.
  std::vector<Tensor> attach(Tape& tape);
  std::size_t parameter_count() const;
};

enum class NormMode { Inference, Training };

/// Output of the encoder: the bottleneck plus (image stack only) the skip
/// feature maps consumed by the generator.
struct Encoding {
  Tensor h;                    // [N, hdim]
  std::vector<Tensor> skips;   // image32: [N,32,16,16], [N,64,8,8], [N,128,4,4]

  std::size_t batch() const { return h.dim(0); }
  /// Rows [begin, begin+count) of every member.
  Encoding slice(std::size_t begin, std::size_t count) const;
  /// Each row repeated `times` times consecutively.
  Encoding repeat_rows(std::size_t times) const;
  Encoding detached() const;
};

struct ZNetOutput {
  Tensor z_next_raw;  // [N, zdim]
  Tensor rho;         // [N, 1], >= 0
};

/// Encoder H, generator G and latent-dynamics network Z for one architecture.
///
/// z is concatenated to the bottleneck h at the generator input. Z sees
/// concat(z_t, h); its first head predicts the displacement added to z_t,
/// its second head is a non-negative momentum |u|.
class ModelBundle {
 public:
  static ModelBundle create(const ArchConfig& config, Rng& rng);

  const ArchConfig& config() const { return config_; }
  std::size_t zdim() const { return config_.zdim; }

  /// x: toy [N,1]; image32 [N,1,32,32].
  Encoding encode(const Tensor& x, NormMode mode = NormMode::Inference);
  Encoding encode(const Tensor& x) const;

  /// z: [N, zdim] with unit-norm rows. Output toy [N,3], image32 [N,1,32,32].
  Tensor generate(const Encoding& enc, const Tensor& z) const;
  /// Same as generate without the unit-norm check on z (noise-perturbed inputs).
  Tensor generate_unchecked(const Encoding& enc, const Tensor& z, NormMode mode = NormMode::Inference);
  Tensor generate_unchecked(const Encoding& enc, const Tensor& z) const;

  ZNetOutput znet(const Tensor& z, const Tensor& h) const;

  Net H, G, Z;

  void export_to(NamedTensors& out) const;
  static ModelBundle import_from(const NamedTensors& in);
  std::size_t parameter_count() const;

 private:
  ArchConfig config_;
};

/// Rows of a [N, ...] tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count);
/// Rows `indices` of a [N, ...] tensor, in the given order.
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices);
Tensor stack_rows(const std::vector<std::vector<double>>& rows);
std::vector<double> row(const Tensor& t, std::size_t r);
void require_unit_rows(const Tensor& z, const char* what);

}  // namespace ltrv
