#include "ltrv/networks.hpp"

#include <cmath>

namespace ltrv {
namespace {

// Std 1/sqrt(3 fan_in), the spread of U(-1/sqrt(fan_in), 1/sqrt(fan_in)). He scaling
// trained noticeably worse on the toy problem.
Tensor init_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  std::normal_distribution<double> normal(0.0, gain / std::sqrt(3.0 * static_cast<double>(fan_in)));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = normal(rng);
  return Tensor(std::move(shape), std::move(v));
}

void add_linear(Net& net, const std::string& name, std::size_t in, std::size_t out, Rng& rng, double gain = 1.0) {
  net.names.push_back(name + "/w");
  net.params.push_back(init_normal({in, out}, in, rng, gain));
  net.names.push_back(name + "/b");
  net.params.push_back(Tensor::zeros({out}));
}

void add_conv(Net& net, const std::string& name, Shape wshape, std::size_t fan_in, std::size_t out, Rng& rng) {
  net.names.push_back(name + "/w");
  net.params.push_back(init_normal(std::move(wshape), fan_in, rng));
  net.names.push_back(name + "/b");
  net.params.push_back(Tensor::zeros({out}));
}

void add_norm(Net& net, const std::string& name, std::size_t features) {
  net.names.push_back(name + "/gamma");
  net.params.push_back(Tensor::filled({features}, 1.0));
  net.names.push_back(name + "/beta");
  net.params.push_back(Tensor::zeros({features}));
  net.norm_names.push_back(name);
  net.norms.emplace_back(features);
}

Tensor linear(const Net& net, std::size_t layer, const Tensor& x) {
  return add(matmul(x, net.params[2 * layer]), net.params[2 * layer + 1]);
}

// Image stack parameter layout: [conv w, conv b, gamma, beta] per block.
struct ImageBlock {
  const Net& net;
  std::size_t index;
  const Tensor& w() const { return net.params[4 * index]; }
  const Tensor& b() const { return net.params[4 * index + 1]; }
  const Tensor& gamma() const { return net.params[4 * index + 2]; }
  const Tensor& beta() const { return net.params[4 * index + 3]; }
};

constexpr std::size_t kEncWidths[4] = {32, 64, 128, 128};

Encoding encode_toy(const Net& H, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != 1) throw TensorError("encode: toy input must be [N,1], got " + shape_string(x.shape()));
  Tensor a = leaky_relu(linear(H, 0, x));
  a = leaky_relu(linear(H, 1, a));
  return Encoding{linear(H, 2, a), {}};
}

Encoding encode_image(const Net& H, std::vector<NormStats>& norms, const Tensor& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != 32 || x.dim(3) != 32) {
    throw TensorError("encode: image32 input must be [N,1,32,32], got " + shape_string(x.shape()));
  }
  Encoding enc;
  Tensor a = x;
  for (std::size_t i = 0; i < 4; ++i) {
    ImageBlock blk{H, i};
    const ConvGeometry g{2, i == 3 ? std::size_t{0} : std::size_t{1}};
    a = conv2d(a, blk.w(), blk.b(), g);
    a = leaky_relu(normalize_batch(a, blk.gamma(), blk.beta(), norms[i], training));
    if (i < 3) enc.skips.push_back(a);
  }
  enc.h = reshape(a, {x.dim(0), kEncWidths[3]});
  return enc;
}

Tensor generate_toy(const Net& G, const ArchConfig& cfg, const Encoding& enc, const Tensor& z) {
  Tensor a = leaky_relu(linear(G, 0, concat({enc.h, z}, 1)));
  a = leaky_relu(linear(G, 1, a));
  return scale(ltrv::tanh(linear(G, 2, a)), cfg.output_scale);
}

// [N, C] -> [N, C, S, S], constant over space.
Tensor tile_spatial(const Tensor& z, std::size_t side) {
  const std::size_t n = z.dim(0), c = z.dim(1);
  Tensor col = reshape(z, {n * c, 1});
  return reshape(matmul(col, Tensor::filled({1, side * side}, 1.0)), {n, c, side, side});
}

Tensor generate_image(const Net& G, std::vector<NormStats>& norms, const ArchConfig& cfg, const Encoding& enc,
                      const Tensor& z, bool training) {
  if (enc.skips.size() != 3) throw TensorError("generate: image32 encoding lacks skip features");
  const std::size_t n = enc.batch();
  Tensor a = reshape(concat({enc.h, z}, 1), {n, cfg.hdim() + cfg.zdim, 1, 1});
  for (std::size_t i = 0; i < 4; ++i) {
    ImageBlock blk{G, i};
    // z goes into every stage; from the bottleneck alone the skips drowned it out.
    if (i > 0) a = concat({a, enc.skips[3 - i], tile_spatial(z, a.dim(2))}, 1);
    const ConvGeometry g{2, i == 0 ? std::size_t{0} : std::size_t{1}};
    a = transpose_conv2d(a, blk.w(), blk.b(), g);
    if (i < 3) a = leaky_relu(normalize_batch(a, blk.gamma(), blk.beta(), norms[i], training));
  }
  return ltrv::tanh(a);
}

void check_z(const ArchConfig& cfg, const Encoding& enc, const Tensor& z) {
  if (z.rank() != 2 || z.dim(1) != cfg.zdim || z.dim(0) != enc.batch()) {
    throw TensorError("latent batch " + shape_string(z.shape()) + " does not match encoding of " +
                      std::to_string(enc.batch()) + " rows and zdim " + std::to_string(cfg.zdim));
  }
}

}  // namespace

std::string arch_name(Arch arch) { return arch == Arch::Toy ? "toy" : "image32"; }

Arch parse_arch(const std::string& name) {
  if (name == "toy") return Arch::Toy;
  if (name == "image32") return Arch::Image32;
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

std::vector<Tensor> Net::attach(Tape& tape) {
  for (Tensor& p : params) p = tape.leaf(p);
  return params;
}

std::size_t Net::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params) n += p.numel();
  return n;
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count) {
  if (begin + count > t.dim(0) || count == 0) throw TensorError("slice_rows: range out of bounds");
  const std::size_t stride = t.numel() / t.dim(0);
  std::vector<double> v(t.data().begin() + static_cast<std::ptrdiff_t>(begin * stride),
                        t.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
  Shape shape = t.shape();
  shape[0] = count;
  return make_unchecked(std::move(shape), std::move(v));
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw TensorError("gather_rows: no indices");
  const std::size_t stride = t.numel() / t.dim(0);
  std::vector<double> v;
  v.reserve(indices.size() * stride);
  for (std::size_t r : indices) {
    if (r >= t.dim(0)) throw TensorError("gather_rows: row " + std::to_string(r) + " out of range");
    v.insert(v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * stride),
             t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * stride));
  }
  Shape shape = t.shape();
  shape[0] = indices.size();
  return make_unchecked(std::move(shape), std::move(v));
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw TensorError("stack_rows: no rows");
  const std::size_t d = rows[0].size();
  std::vector<double> v;
  v.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw TensorError("stack_rows: ragged rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), d}, std::move(v));
}

std::vector<double> row(const Tensor& t, std::size_t r) {
  const std::size_t stride = t.numel() / t.dim(0);
  return {t.data().begin() + static_cast<std::ptrdiff_t>(r * stride),
          t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * stride)};
}

void require_unit_rows(const Tensor& z, const char* what) {
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    const double n = l2_norm(row(z, r));
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      throw DegenerateInput(std::string(what) + ": latent row " + std::to_string(r) + " is not unit-norm (|z| = " +
                            std::to_string(n) + ")");
    }
  }
}

namespace {

Tensor repeat_tensor_rows(const Tensor& t, std::size_t times) {
  const std::size_t stride = t.numel() / t.dim(0);
  std::vector<double> v;
  v.reserve(t.numel() * times);
  for (std::size_t r = 0; r < t.dim(0); ++r)
    for (std::size_t k = 0; k < times; ++k)
      v.insert(v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * stride),
               t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * stride));
  Shape shape = t.shape();
  shape[0] *= times;
  return make_unchecked(std::move(shape), std::move(v));
}

}  // namespace

Encoding Encoding::slice(std::size_t begin, std::size_t count) const {
  Encoding out{slice_rows(h, begin, count), {}};
  for (const Tensor& s : skips) out.skips.push_back(slice_rows(s, begin, count));
  return out;
}

Encoding Encoding::repeat_rows(std::size_t times) const {
  Encoding out{repeat_tensor_rows(h, times), {}};
  for (const Tensor& s : skips) out.skips.push_back(repeat_tensor_rows(s, times));
  return out;
}

Encoding Encoding::detached() const {
  Encoding out{h.detached(), {}};
  for (const Tensor& s : skips) out.skips.push_back(s.detached());
  return out;
}

ModelBundle ModelBundle::create(const ArchConfig& config, Rng& rng) {
  if (config.zdim == 0) throw std::invalid_argument("zdim must be >= 1");
  ModelBundle m;
  m.config_ = config;
  const std::size_t hd = config.hdim();
  const std::size_t zd = config.zdim;
  if (config.arch == Arch::Toy) {
    const std::size_t w = config.hidden;
    add_linear(m.H, "H/l0", 1, w, rng);
    add_linear(m.H, "H/l1", w, w, rng);
    add_linear(m.H, "H/l2", w, hd, rng);
    add_linear(m.G, "G/l0", hd + zd, w, rng);
    add_linear(m.G, "G/l1", w, w, rng);
    add_linear(m.G, "G/l2", w, 3, rng);
    add_linear(m.Z, "Z/l0", zd + hd, w, rng);
    add_linear(m.Z, "Z/l1", w, w, rng);
    add_linear(m.Z, "Z/step", w, zd, rng, 0.1);
    add_linear(m.Z, "Z/rho", w, 1, rng, 0.1);
  } else {
    std::size_t in = 1;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string name = "H/conv" + std::to_string(i);
      add_conv(m.H, name, {kEncWidths[i], in, 4, 4}, in * 16, kEncWidths[i], rng);
      add_norm(m.H, name + "/norm", kEncWidths[i]);
      in = kEncWidths[i];
    }
    // Decoder mirrors the encoder; inputs after the first block include the skip channels and z.
    const std::size_t dec_in[4] = {hd + zd, 128 + 128 + zd, 64 + 64 + zd, 32 + 32 + zd};
    const std::size_t dec_out[4] = {128, 64, 32, 1};
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string name = "G/tconv" + std::to_string(i);
      add_conv(m.G, name, {dec_in[i], dec_out[i], 4, 4}, dec_in[i] * 4, dec_out[i], rng);
      if (i < 3) {
        add_norm(m.G, name + "/norm", dec_out[i]);
      } else {
        m.G.names.push_back(name + "/unused_gamma");
        m.G.params.push_back(Tensor::filled({1}, 1.0));
        m.G.names.push_back(name + "/unused_beta");
        m.G.params.push_back(Tensor::zeros({1}));
      }
    }
    const std::size_t w = 128;
    add_linear(m.Z, "Z/l0", zd + hd, w, rng);
    add_linear(m.Z, "Z/l1", w, w, rng);
    add_linear(m.Z, "Z/step", w, zd, rng, 0.1);
    add_linear(m.Z, "Z/rho", w, 1, rng, 0.1);
  }
  return m;
}

Encoding ModelBundle::encode(const Tensor& x, NormMode mode) {
  if (config_.arch == Arch::Toy) return encode_toy(H, x);
  return encode_image(H, H.norms, x, mode == NormMode::Training);
}

Encoding ModelBundle::encode(const Tensor& x) const {
  if (config_.arch == Arch::Toy) return encode_toy(H, x);
  std::vector<NormStats> norms = H.norms;
  return encode_image(H, norms, x, false);
}

Tensor ModelBundle::generate(const Encoding& enc, const Tensor& z) const {
  check_z(config_, enc, z);
  require_unit_rows(z, "generate");
  return generate_unchecked(enc, z);
}

Tensor ModelBundle::generate_unchecked(const Encoding& enc, const Tensor& z, NormMode mode) {
  check_z(config_, enc, z);
  if (config_.arch == Arch::Toy) return generate_toy(G, config_, enc, z);
  return generate_image(G, G.norms, config_, enc, z, mode == NormMode::Training);
}

Tensor ModelBundle::generate_unchecked(const Encoding& enc, const Tensor& z) const {
  check_z(config_, enc, z);
  if (config_.arch == Arch::Toy) return generate_toy(G, config_, enc, z);
  std::vector<NormStats> norms = G.norms;
  return generate_image(G, norms, config_, enc, z, false);
}

ZNetOutput ModelBundle::znet(const Tensor& z, const Tensor& h) const {
  if (z.rank() != 2 || z.dim(1) != config_.zdim || h.rank() != 2 || h.dim(1) != config_.hdim() ||
      z.dim(0) != h.dim(0)) {
    throw TensorError("znet: shape mismatch z " + shape_string(z.shape()) + ", h " + shape_string(h.shape()));
  }
  Tensor a = leaky_relu(linear(Z, 0, concat({z, h}, 1)));
  a = leaky_relu(linear(Z, 1, a));
  // |u| rather than softplus: softplus rows saturated near zero and never recovered.
  return ZNetOutput{add(z, linear(Z, 2, a)), leaky_relu(linear(Z, 3, a), -1.0)};
}

std::size_t ModelBundle::parameter_count() const {
  return H.parameter_count() + G.parameter_count() + Z.parameter_count();
}

void ModelBundle::export_to(NamedTensors& out) const {
  out.set("meta/arch", Tensor::scalar(config_.arch == Arch::Toy ? 0.0 : 1.0));
  out.set("meta/zdim", Tensor::scalar(static_cast<double>(config_.zdim)));
  out.set("meta/hidden", Tensor::scalar(static_cast<double>(config_.hidden)));
  out.set("meta/output_scale", Tensor::scalar(config_.output_scale));
  for (const Net* net : {&H, &G, &Z}) {
    for (std::size_t i = 0; i < net->params.size(); ++i) out.set(net->names[i], net->params[i].detached());
    for (std::size_t i = 0; i < net->norms.size(); ++i) {
      out.set(net->norm_names[i] + "/running_mean", Tensor::vector(net->norms[i].mean));
      out.set(net->norm_names[i] + "/running_var", Tensor::vector(net->norms[i].var));
    }
  }
}

ModelBundle ModelBundle::import_from(const NamedTensors& in) {
  ArchConfig cfg;
  const double arch = in.get("meta/arch").item();
  if (arch != 0.0 && arch != 1.0) throw FormatError("unknown meta/arch value");
  cfg.arch = arch == 0.0 ? Arch::Toy : Arch::Image32;
  cfg.zdim = static_cast<std::size_t>(in.get("meta/zdim").item());
  if (in.contains("meta/hidden")) cfg.hidden = static_cast<std::size_t>(in.get("meta/hidden").item());
  if (in.contains("meta/output_scale")) cfg.output_scale = in.get("meta/output_scale").item();
  Rng rng(0);
  ModelBundle m = create(cfg, rng);
  for (Net* net : {&m.H, &m.G, &m.Z}) {
    for (std::size_t i = 0; i < net->params.size(); ++i) {
      const Tensor& t = in.get(net->names[i]);
      if (t.shape() != net->params[i].shape()) {
        throw FormatError("parameter " + net->names[i] + " has shape " + shape_string(t.shape()) + ", expected " +
                          shape_string(net->params[i].shape()));
      }
      net->params[i] = t;
    }
    for (std::size_t i = 0; i < net->norms.size(); ++i) {
      net->norms[i].mean = in.get(net->norm_names[i] + "/running_mean").to_vector();
      net->norms[i].var = in.get(net->norm_names[i] + "/running_var").to_vector();
    }
  }
  return m;
}

}  // namespace ltrv
