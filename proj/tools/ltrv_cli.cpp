#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ltrv/config.hpp"
#include "ltrv/experiments.hpp"
#include "ltrv/spectral.hpp"

using namespace ltrv;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out;
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  std::ofstream out_;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--config", c.config_file, "Flat key = value config file");
  cmd->add_option("--set", c.sets, "Override one key, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Random seed");
}

fs::path prepare_out(const Common& c) {
  const fs::path out(c.out);
  fs::create_directories(out);
  return out;
}

// Defaults, then the config file, then --set, then dedicated flags.
Config resolve(const Common& c, Config defaults, const std::vector<std::string>& extra_keys,
               const std::vector<std::pair<std::string, std::string>>& flags) {
  std::vector<std::string> known = extra_keys;
  for (const auto& [k, v] : defaults.values()) known.push_back(k);
  Config user;
  if (!c.config_file.empty()) user = Config::load(c.config_file);
  for (const std::string& s : c.sets) user.set_from_arg(s);
  user.require_known(known);
  for (const auto& [k, v] : user.values()) defaults.set(k, v);
  for (const auto& [k, v] : flags) defaults.set(k, v);
  if (c.seed) defaults.set("seed", std::to_string(*c.seed));
  return defaults;
}

void log_config(const fs::path& out, const std::string& command, const Config& config) {
  std::cout << "# " << command << " resolved config\n" << config.dump() << std::flush;
  std::ofstream(out / "config.txt") << config.dump();
}

void write_model(const fs::path& path, const TrainResult& r) {
  NamedTensors nt;
  r.model.export_to(nt);
  r.table.export_to(nt);
  save_checkpoint(path, nt);
}

ModelBundle load_model(const std::string& path) { return ModelBundle::import_from(load_checkpoint(path)); }

void write_logs(const fs::path& out, const TrainResult& r) {
  std::ofstream log(out / "train_log.csv");
  r.log.write_csv(log);
  Csv epochs(out / "epochs.csv", "epoch,mean_E");
  const std::vector<double> means = r.log.epoch_means();
  for (std::size_t e = 0; e < means.size(); ++e) epochs.row(e, means[e]);
}

void print_epoch(const EpochSummary& e) {
  std::printf("epoch %zu  E %.5f  %.1fs\n", e.epoch, e.mean_E, e.seconds);
  std::fflush(stdout);
}

ToyDataConfig toy_data_from(const Config& c) {
  ToyDataConfig d;
  d.n_train = static_cast<std::size_t>(c.get_int("n_train", static_cast<long long>(d.n_train)));
  d.x_lo = c.get_double("x_lo", d.x_lo);
  d.x_hi = c.get_double("x_hi", d.x_hi);
  d.p_plus = c.get_double("p_plus", d.p_plus);
  d.data_seed = static_cast<std::uint64_t>(c.get_int("data_seed", static_cast<long long>(d.data_seed)));
  d.paired = c.get_bool("paired", d.paired);
  return d;
}

Config toy_defaults() {
  Config c = to_config(toy_train_config(), ArchConfig{});
  const ToyDataConfig d;
  c.set("n_train", std::to_string(d.n_train));
  c.set("x_lo", format_double(d.x_lo));
  c.set("x_hi", format_double(d.x_hi));
  c.set("p_plus", format_double(d.p_plus));
  c.set("data_seed", std::to_string(d.data_seed));
  c.set("paired", d.paired ? "true" : "false");
  return c;
}

void train_toy_cmd(const Common& common) {
  const fs::path out = prepare_out(common);
  const Config c = resolve(common, toy_defaults(), {}, {});
  log_config(out, "train-toy", c);
  const TrainConfig t = train_config_from(c, toy_train_config());
  ArchConfig a = arch_config_from(c, ArchConfig{});
  const TrainResult r = train_toy(t, toy_data_from(c), a, print_epoch);
  write_model(out / "toy.ltrv", r);
  write_logs(out, r);
}

struct ImageFlags {
  std::string images, labels;
  std::size_t limit = 1000;
  std::size_t probe = 0;
  double p_box = 0.3;
  double overlap_rate = 0.0;
};

void train_image_cmd(const Common& common, const ImageFlags& f) {
  const fs::path out = prepare_out(common);
  const Config c = resolve(common, to_config(image_train_config(), image_arch_config()), {}, {});
  log_config(out, "train-image", c);
  const TrainConfig t = train_config_from(c, image_train_config());
  ArchConfig a = arch_config_from(c, image_arch_config());
  const ImageSet all = mnist_load(f.images, f.labels);
  if (f.limit + f.probe > all.size()) throw std::runtime_error("--limit plus --probe exceeds the image count");
  CorruptionSpec spec = two_mode_corruption(t.seed);
  spec.p_box = f.p_box;
  spec.overlap_rate = f.overlap_rate;
  const TrainResult r = train(t, a, image_source(image_subset(all, 0, f.limit), spec), print_epoch);
  write_model(out / "image.ltrv", r);
  write_logs(out, r);
  if (f.probe == 0) return;
  const CorruptedBatch probe = masked_box_probe(image_subset(all, f.limit, f.probe), spec, t.seed + 1);
  Rng rng(t.seed + 2);
  const TwoModeResult tm = evaluate_two_mode(r.model, probe, 32, kDefaultInferenceSteps, rng);
  Csv csv(out / "two_mode.csv", "input,clusters");
  for (std::size_t i = 0; i < tm.clusters.size(); ++i) csv.row(i, tm.clusters[i]);
  std::printf("two-mode fraction %.3f\n", tm.fraction);
}

struct InferFlags {
  std::string model;
  std::size_t restarts = 64;
  std::size_t steps = kDefaultInferenceSteps;
  double x = 0.5;
  std::string images;
  std::size_t index = 0;
  std::string rule = "momentum";
};

void infer_cmd(const Common& common, const InferFlags& f) {
  const fs::path out = prepare_out(common);
  Config c;
  c.set("seed", std::to_string(common.seed.value_or(0)));
  c.set("restarts", std::to_string(f.restarts));
  c.set("steps", std::to_string(f.steps));
  c.set("rule", f.rule);
  c.set("x", format_double(f.x));
  c.set("index", std::to_string(f.index));
  log_config(out, "infer", c);
  if (f.rule != "momentum" && f.rule != "direct") throw std::runtime_error("--rule must be momentum or direct");
  const ModelBundle m = load_model(f.model);
  Tensor x;
  if (m.config().arch == Arch::Toy) {
    x = Tensor({1, 1}, {f.x});
  } else {
    if (f.images.empty()) throw std::runtime_error("image models need --images");
    std::ifstream in(f.images, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + f.images);
    const auto imgs = read_idx_images(in);
    if (f.index >= imgs.size()) throw std::runtime_error("--index out of range");
    ImageSet one;
    one.images = {imgs[f.index]};
    CorruptionSpec spec = two_mode_corruption(0);
    x = masked_box_probe(one, spec, common.seed.value_or(0)).inputs;
  }
  Rng rng(common.seed.value_or(0));
  const TraversalOptions opt{f.rule == "direct" ? UpdateRule::Direct : UpdateRule::Momentum, false};
  const TraversalBatch run = multi_restart(m, x, f.restarts, f.steps, rng, opt);
  const Encoding enc = m.encode(x);

  std::string header = "restart,step,rho";
  for (std::size_t d = 0; d < m.zdim(); ++d) header += ",z_" + std::to_string(d);
  Csv trace(out / "trace.csv", header);
  for (const TraversalTrace& tr : run.traces) {
    // rho_hat at z_N is not used by the traversal but completes the row.
    const double rho_end = m.znet(stack_rows({tr.z.back().values()}), enc.h).rho[0];
    for (std::size_t t = 0; t < tr.z.size(); ++t) {
      std::ostringstream line;
      line << tr.restart << ',' << t << ',' << num(t < tr.rho.size() ? tr.rho[t] : rho_end);
      for (double v : tr.z[t].values()) line << ',' << num(v);
      trace.row(line.str());
    }
  }
  if (m.config().arch == Arch::Toy) {
    Csv outputs(out / "outputs.csv", "restart,y_0,y_1,y_2");
    for (std::size_t k = 0; k < f.restarts; ++k)
      outputs.row(k, run.outputs[k * 3], run.outputs[k * 3 + 1], run.outputs[k * 3 + 2]);
  } else {
    std::vector<std::vector<double>> imgs;
    for (std::size_t k = 0; k < f.restarts; ++k) {
      std::vector<double> img = row(run.outputs, k);
      for (double& p : img) p = std::clamp((p + 1.0) / 2.0, 0.0, 1.0);
      imgs.push_back(img);
    }
    write_pgm(out / "outputs.pgm", imgs, 8);
  }
}

void ablate_cmd(const Common& common, const std::vector<std::size_t>& dims) {
  const fs::path out = prepare_out(common);
  const Config c = resolve(common, toy_defaults(), {}, {});
  log_config(out, "ablate-zdim", c);
  const TrainConfig t = train_config_from(c, toy_train_config());
  Csv csv(out / "ablate_zdim.csv", "zdim,final_E,diversity");
  for (std::size_t d : dims) {
    if (d < 1) throw std::runtime_error("--dims entries must be >= 1");
    const ZdimResult r = ablate_zdim(t, toy_data_from(c), d);
    csv.row(r.zdim, r.final_E, r.diversity);
    std::printf("zdim %zu  E %.5f  diversity %.5f\n", r.zdim, r.final_E, r.diversity);
  }
}

struct SpectralFlags {
  std::string input;
  double sigma = 0.05;
  double mask = 0.1;
  std::size_t points = 20000;
};

// Star-shaped test body: r = 0.7 + 0.15 cos(3 phi) + 0.1 sin(2 theta) sin(phi).
std::vector<Vec3> synthetic_body(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = std::acos(1.0 - 2.0 * u(rng));
    const double theta = 2.0 * std::numbers::pi * u(rng);
    const double r = 0.7 + 0.15 * std::cos(3.0 * phi) + 0.1 * std::sin(2.0 * theta) * std::sin(phi);
    pts.push_back({r * std::sin(phi) * std::cos(theta), r * std::sin(phi) * std::sin(theta), r * std::cos(phi)});
  }
  return pts;
}

void spectral_cmd(const Common& common, const SpectralFlags& f) {
  const fs::path out = prepare_out(common);
  Config c;
  c.set("input", f.input.empty() ? "synthetic" : f.input);
  c.set("sigma", format_double(f.sigma));
  c.set("mask", format_double(f.mask));
  c.set("seed", std::to_string(common.seed.value_or(0)));
  log_config(out, "spectral", c);
  Rng rng(common.seed.value_or(0));
  std::vector<Vec3> pts;
  if (f.input.empty()) {
    pts = synthetic_body(f.points, rng);
  } else {
    const std::string ext = fs::path(f.input).extension().string();
    if (ext == ".off") pts = read_off(f.input);
    else if (ext == ".xyz") pts = read_xyz(f.input);
    else throw std::runtime_error("--input must be .off or .xyz");
  }
  constexpr int kB = 32, kL = 31;
  const SphGrid grid = pointcloud_to_sphere_fn(normalize_to_unit_ball(pts), kB);
  const SphCoeffs coeffs = sh_analyze(grid, kL);
  const SpectralMap clean = make_spectral_map(coeffs);
  const SpectralMap noisy = corrupt_map(clean, f.sigma, f.mask, rng);
  for (const auto& [name, map] : {std::pair{"clean.ltrv", &clean}, std::pair{"specmap.ltrv", &noisy}}) {
    NamedTensors nt;
    map->export_to(nt);
    save_checkpoint(out / name, nt);
  }
  Csv csv(out / "spectral.csv", "l,m,re,im,re_noisy,im_noisy,masked");
  for (int l = 0; l <= kL; ++l)
    for (int m = -l; m <= l; ++m) {
      const std::size_t i = static_cast<std::size_t>(SphCoeffs::index(l, m));
      csv.row(l, m, clean.real[i], clean.imag[i], noisy.real[i], noisy.imag[i], noisy.mask[i]);
    }
}

struct GridFlags {
  std::string model;
  double x_lo = 0.0, x_hi = 1.5;
  std::size_t points = 31;
  std::size_t passes = 64;
  double delta = kUncertaintyDelta;
  std::size_t pairs = 200;
};

ModelBundle load_toy(const std::string& path) {
  ModelBundle m = load_model(path);
  if (m.config().arch != Arch::Toy) throw std::runtime_error(path + " is not a toy checkpoint");
  return m;
}

void uncertainty_cmd(const Common& common, const GridFlags& f) {
  const fs::path out = prepare_out(common);
  Config c;
  c.set("x_lo", format_double(f.x_lo));
  c.set("x_hi", format_double(f.x_hi));
  c.set("points", std::to_string(f.points));
  c.set("passes", std::to_string(f.passes));
  c.set("delta", format_double(f.delta));
  c.set("seed", std::to_string(common.seed.value_or(0)));
  log_config(out, "uncertainty", c);
  const ModelBundle m = load_toy(f.model);
  Csv csv(out / "uncertainty.csv", "x,mean_variance");
  for (const UncertaintyPoint& p :
       uncertainty_curve(m, linspace(f.x_lo, f.x_hi, f.points), f.delta, f.passes, common.seed.value_or(0)))
    csv.row(p.x, p.mean_variance);
}

void lipschitz_cmd(const Common& common, const GridFlags& f) {
  const fs::path out = prepare_out(common);
  Config c;
  c.set("x_lo", format_double(f.x_lo));
  c.set("x_hi", format_double(f.x_hi));
  c.set("points", std::to_string(f.points));
  c.set("pairs", std::to_string(f.pairs));
  c.set("seed", std::to_string(common.seed.value_or(0)));
  log_config(out, "diag-lipschitz", c);
  const ModelBundle m = load_toy(f.model);
  Csv csv(out / "lipschitz.csv", "x,max,p50,p90,p99");
  for (const LipschitzPoint& p :
       lipschitz_curve(m, linspace(f.x_lo, f.x_hi, f.points), f.pairs, common.seed.value_or(0)))
    csv.row(p.x, p.estimate.max, p.estimate.p50, p.estimate.p90, p.estimate.p99);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent traversal experiments"};
  app.require_subcommand(1);
  Common common;

  auto* toy = app.add_subcommand("train-toy", "Train on the two-branch toy curve");
  add_common(toy, common);

  ImageFlags img;
  auto* image = app.add_subcommand("train-image", "Train on corrupted MNIST digits");
  add_common(image, common);
  image->add_option("--images", img.images, "IDX image file")->required();
  image->add_option("--labels", img.labels, "IDX label file")->required();
  image->add_option("--limit", img.limit, "Training images taken from the start of the file");
  image->add_option("--probe", img.probe, "Held-out images for the two-mode check (0 skips it)");
  image->add_option("--p-box", img.p_box, "Rate of the white-box mode");
  image->add_option("--overlap-rate", img.overlap_rate, "Rate of top-half overlap corruption");

  InferFlags inf;
  auto* infer = app.add_subcommand("infer", "Traverse the latent space from random restarts");
  add_common(infer, common);
  infer->add_option("--model", inf.model, "Checkpoint")->required();
  infer->add_option("--restarts", inf.restarts, "Number of restarts");
  infer->add_option("--steps", inf.steps, "Traversal steps");
  infer->add_option("--x", inf.x, "Toy input");
  infer->add_option("--images", inf.images, "IDX image file (image models)");
  infer->add_option("--index", inf.index, "Image index");
  infer->add_option("--rule", inf.rule, "momentum or direct");

  std::vector<std::size_t> dims{3, 8, 16};
  auto* ablate = app.add_subcommand("ablate-zdim", "Toy training per latent dimension");
  add_common(ablate, common);
  ablate->add_option("--dims", dims, "Latent dimensions")->delimiter(',');

  SpectralFlags spec;
  auto* spectral = app.add_subcommand("spectral", "Point cloud to a corrupted spectral map");
  add_common(spectral, common);
  spectral->add_option("--input", spec.input, ".off or .xyz file; synthetic body when omitted");
  spectral->add_option("--sigma", spec.sigma, "Noise standard deviation");
  spectral->add_option("--mask", spec.mask, "Fraction of masked cells");

  GridFlags grid;
  auto* unc = app.add_subcommand("uncertainty", "Output variance over an x grid");
  add_common(unc, common);
  unc->add_option("--model", grid.model, "Toy checkpoint")->required();
  unc->add_option("--x-lo", grid.x_lo);
  unc->add_option("--x-hi", grid.x_hi);
  unc->add_option("--points", grid.points);
  unc->add_option("--passes", grid.passes);
  unc->add_option("--delta", grid.delta);

  auto* lip = app.add_subcommand("diag-lipschitz", "Chord ratios of G over z on an x grid");
  add_common(lip, common);
  lip->add_option("--model", grid.model, "Toy checkpoint")->required();
  lip->add_option("--x-lo", grid.x_lo);
  lip->add_option("--x-hi", grid.x_hi);
  lip->add_option("--points", grid.points);
  lip->add_option("--pairs", grid.pairs);

  CLI11_PARSE(app, argc, argv);
  try {
    if (toy->parsed()) train_toy_cmd(common);
    else if (image->parsed()) train_image_cmd(common, img);
    else if (infer->parsed()) infer_cmd(common, inf);
    else if (ablate->parsed()) ablate_cmd(common, dims);
    else if (spectral->parsed()) spectral_cmd(common, spec);
    else if (unc->parsed()) uncertainty_cmd(common, grid);
    else if (lip->parsed()) lipschitz_cmd(common, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
