#include "ltrv/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>

#include "ltrv/tape.hpp"

namespace ltrv {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

Tensor finish(OpKind kind, std::span<const Tensor> inputs, Shape shape, std::vector<double> out,
              Tape::BackwardFn backward) {
  require_finite(out, op_name(kind).data());
  Tensor result = make_unchecked(std::move(shape), std::move(out));
  if (Tape* tape = common_tape(inputs)) {
    return tape->record(kind, inputs, std::move(result), std::move(backward));
  }
  return result;
}

// Broadcast factor of b over a: b's shape must equal a's shape or a trailing suffix of it.
std::size_t broadcast_repeats(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sb.size() <= sa.size() && !sb.empty();
  for (std::size_t i = 0; ok && i < sb.size(); ++i) ok = sb[sb.size() - 1 - i] == sa[sa.size() - 1 - i];
  if (!ok) {
    throw TensorError(std::string(op) + ": shape mismatch " + shape_string(sa) + " vs " + shape_string(sb));
  }
  return a.numel() / b.numel();
}

// Lowers one image [C,H,W] into columns [C*k*k, Ho*Wo].
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            ConvGeometry g, std::size_t ho, std::size_t wo, double* cols) {
  const std::size_t plane = ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ci * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = inside ? img[(ci * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into an image.
void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            ConvGeometry g, std::size_t ho, std::size_t wo, double* img) {
  const std::size_t plane = ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ci * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            img[(ci * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

std::size_t conv_out(std::size_t in, std::size_t k, ConvGeometry g) {
  if (in + 2 * g.pad < k) throw TensorError("conv2d: kernel larger than padded input");
  return (in + 2 * g.pad - k) / g.stride + 1;
}

void check_conv_bias(const Tensor& bias, std::size_t channels, const char* op) {
  if (bias.empty()) return;
  if (bias.rank() != 1 || bias.dim(0) != channels) {
    throw TensorError(std::string(op) + ": bias shape " + shape_string(bias.shape()) + " does not match " +
                      std::to_string(channels) + " output channels");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
    throw TensorError("matmul: shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
  std::vector<double> out(m * n);
  MapC A(a.data().data(), m, k), B(b.data().data(), k, n);
  MapM C(out.data(), m, n);
  C.noalias() = A * B;
  Shape shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  const std::array<Tensor, 2> in{a, b};
  return finish(OpKind::Matmul, in, std::move(shape), std::move(out),
                [a, b, m, k, n](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  MapC G(go.data(), m, n);
                  if (gi[0]) {
                    MapM GA(gi[0]->data(), m, k);
                    GA.noalias() += G * MapC(b.data().data(), k, n).transpose();
                  }
                  if (gi[1]) {
                    MapM GB(gi[1]->data(), k, n);
                    GB.noalias() += MapC(a.data().data(), m, k).transpose() * G;
                  }
                });
}

namespace {

Tensor add_like(const Tensor& a, const Tensor& b, double sign, OpKind kind, const char* name) {
  const std::size_t reps = broadcast_repeats(a, b, name);
  const std::size_t nb = b.numel();
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = av[r * nb + j] + sign * bv[j];
  const std::array<Tensor, 2> in{a, b};
  return finish(kind, in, a.shape(), std::move(out),
                [reps, nb, sign](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  if (gi[0]) {
                    auto& g = *gi[0];
                    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
                  }
                  if (gi[1]) {
                    auto& g = *gi[1];
                    for (std::size_t r = 0; r < reps; ++r)
                      for (std::size_t j = 0; j < nb; ++j) g[j] += sign * go[r * nb + j];
                  }
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like(a, b, 1.0, OpKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like(a, b, -1.0, OpKind::Sub, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a, b, "mul");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = av[r * nb + j] * bv[j];
  const std::array<Tensor, 2> in{a, b};
  return finish(OpKind::Mul, in, a.shape(), std::move(out),
                [a, b, reps, nb](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  const auto av = a.data();
                  const auto bv = b.data();
                  for (std::size_t r = 0; r < reps; ++r) {
                    for (std::size_t j = 0; j < nb; ++j) {
                      const std::size_t i = r * nb + j;
                      if (gi[0]) (*gi[0])[i] += go[i] * bv[j];
                      if (gi[1]) (*gi[1])[j] += go[i] * av[i];
                    }
                  }
                });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::Scale, in, a.shape(), std::move(out),
                [factor](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  auto& g = *gi[0];
                  for (std::size_t i = 0; i < go.size(); ++i) g[i] += factor * go[i];
                });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  std::vector<Tensor> v(parts);
  return concat(std::span<const Tensor>(v), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw TensorError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw TensorError("concat: axis out of range for " + shape_string(first));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw TensorError("concat: shape mismatch " + shape_string(first) + " vs " + shape_string(s));
    widths.push_back(s[axis] * inner);
    total += s[axis];
  }
  const std::size_t row = total * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * widths[p], widths[p], out.data() + o * row + offset);
    offset += widths[p];
  }
  Shape shape = first;
  shape[axis] = total;
  return finish(OpKind::Concat, parts, std::move(shape), std::move(out),
                [widths, outer, row](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  std::size_t offset = 0;
                  for (std::size_t p = 0; p < widths.size(); ++p) {
                    if (gi[p]) {
                      auto& g = *gi[p];
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t j = 0; j < widths[p]; ++j) g[o * widths[p] + j] += go[o * row + offset + j];
                    }
                    offset += widths[p];
                  }
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw TensorError("reshape: cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::Reshape, in, std::move(shape), a.to_vector(),
                [](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  auto& g = *gi[0];
                  for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
                });
}

namespace {

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, OpKind kind, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  const std::array<Tensor, 1> in{a};
  return finish(kind, in, a.shape(), std::move(out),
                [a, deriv](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  auto& g = *gi[0];
                  const auto av = a.data();
                  for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * deriv(av[i]);
                });
}

double softplus_value(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, OpKind::LeakyRelu, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, OpKind::Tanh, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor softplus(const Tensor& a) {
  return unary(a, OpKind::Softplus, softplus_value, sigmoid);
}

Tensor abs_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::AbsSum, in, {1}, {s}, [a](std::span<const double> go, std::span<std::vector<double>*> gi) {
    auto& g = *gi[0];
    const auto av = a.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[0] * static_cast<double>((av[i] > 0.0) - (av[i] < 0.0));
  });
}

Tensor huber_sum(const Tensor& a, double delta) {
  if (!(delta > 0.0)) throw TensorError("huber_sum: delta must be positive");
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v) <= delta ? v * v / (2.0 * delta) : std::abs(v) - 0.5 * delta;
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::HuberSum, in, {1}, {s},
                [a, delta](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  auto& g = *gi[0];
                  const auto av = a.data();
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[0] * std::clamp(av[i] / delta, -1.0, 1.0);
                });
}

Tensor square_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::SquareSum, in, {1}, {s},
                [a](std::span<const double> go, std::span<std::vector<double>*> gi) {
                  auto& g = *gi[0];
                  const auto av = a.data();
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * go[0] * av[i];
                });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.numel());
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::Mean, in, {1}, {s / n}, [n](std::span<const double> go, std::span<std::vector<double>*> gi) {
    auto& g = *gi[0];
    for (double& v : g) v += go[0] / n;
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvGeometry geom) {
  if (x.rank() != 4 || w.rank() != 4 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3) || geom.stride == 0) {
    throw TensorError("conv2d: shape mismatch " + shape_string(x.shape()) + " * " + shape_string(w.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  check_conv_bias(bias, o, "conv2d");
  const std::size_t ho = conv_out(h, k, geom), wo = conv_out(wd, k, geom);
  const std::size_t ckk = c * k * k, plane = ho * wo;

  std::vector<double> cols(n * ckk * plane);
  for (std::size_t i = 0; i < n; ++i)
    im2col(x.data().data() + i * c * h * wd, c, h, wd, k, geom, ho, wo, cols.data() + i * ckk * plane);

  std::vector<double> out(n * o * plane);
  MapC W(w.data().data(), o, ckk);
  for (std::size_t i = 0; i < n; ++i) {
    MapM Y(out.data() + i * o * plane, o, plane);
    Y.noalias() = W * MapC(cols.data() + i * ckk * plane, ckk, plane);
    if (!bias.empty())
      for (std::size_t oc = 0; oc < o; ++oc) Y.row(static_cast<Eigen::Index>(oc)).array() += bias[oc];
  }

  auto saved_cols = std::make_shared<const std::vector<double>>(std::move(cols));
  const std::array<Tensor, 3> in{x, w, bias};
  std::span<const Tensor> inputs(in.data(), bias.empty() ? 2 : 3);
  return finish(OpKind::Conv2d, inputs, {n, o, ho, wo}, std::move(out),
                [w, saved_cols, n, c, h, wd, o, k, geom, ho, wo, ckk, plane](
                    std::span<const double> go, std::span<std::vector<double>*> gi) {
                  MapC W(w.data().data(), o, ckk);
                  std::vector<double> dcols(ckk * plane);
                  for (std::size_t i = 0; i < n; ++i) {
                    MapC G(go.data() + i * o * plane, o, plane);
                    if (gi[1]) {
                      MapM GW(gi[1]->data(), o, ckk);
                      GW.noalias() += G * MapC(saved_cols->data() + i * ckk * plane, ckk, plane).transpose();
                    }
                    if (gi[0]) {
                      MapM DC(dcols.data(), ckk, plane);
                      DC.noalias() = W.transpose() * G;
                      col2im(dcols.data(), c, h, wd, k, geom, ho, wo, gi[0]->data() + i * c * h * wd);
                    }
                    if (gi.size() > 2 && gi[2]) {
                      for (std::size_t oc = 0; oc < o; ++oc) (*gi[2])[oc] += G.row(static_cast<Eigen::Index>(oc)).sum();
                    }
                  }
                });
}

Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvGeometry geom) {
  if (x.rank() != 4 || w.rank() != 4 || w.dim(0) != x.dim(1) || w.dim(2) != w.dim(3) || geom.stride == 0) {
    throw TensorError("transpose_conv2d: shape mismatch " + shape_string(x.shape()) + " * " +
                      shape_string(w.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(1), k = w.dim(2);
  check_conv_bias(bias, o, "transpose_conv2d");
  if ((h - 1) * geom.stride + k < 2 * geom.pad + 1 || (wd - 1) * geom.stride + k < 2 * geom.pad + 1) {
    throw TensorError("transpose_conv2d: padding too large");
  }
  const std::size_t ho = (h - 1) * geom.stride + k - 2 * geom.pad;
  const std::size_t wo = (wd - 1) * geom.stride + k - 2 * geom.pad;
  if (conv_out(ho, k, geom) != h || conv_out(wo, k, geom) != wd) {
    throw TensorError("transpose_conv2d: geometry is not invertible");
  }
  const std::size_t okk = o * k * k, plane = h * wd;

  std::vector<double> out(n * o * ho * wo, 0.0);
  std::vector<double> cols(okk * plane);
  MapC W(w.data().data(), c, okk);
  for (std::size_t i = 0; i < n; ++i) {
    MapM Cm(cols.data(), okk, plane);
    Cm.noalias() = W.transpose() * MapC(x.data().data() + i * c * plane, c, plane);
    double* img = out.data() + i * o * ho * wo;
    col2im(cols.data(), o, ho, wo, k, geom, h, wd, img);
    if (!bias.empty())
      for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t p = 0; p < ho * wo; ++p) img[oc * ho * wo + p] += bias[oc];
  }

  const std::array<Tensor, 3> in{x, w, bias};
  std::span<const Tensor> inputs(in.data(), bias.empty() ? 2 : 3);
  return finish(OpKind::TransposeConv2d, inputs, {n, o, ho, wo}, std::move(out),
                [x, w, n, c, o, k, geom, ho, wo, h, wd, okk, plane](std::span<const double> go,
                                                                    std::span<std::vector<double>*> gi) {
                  MapC W(w.data().data(), c, okk);
                  std::vector<double> gcols(okk * plane);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double* gimg = go.data() + i * o * ho * wo;
                    im2col(gimg, o, ho, wo, k, geom, h, wd, gcols.data());
                    MapC GC(gcols.data(), okk, plane);
                    if (gi[0]) {
                      MapM GX(gi[0]->data() + i * c * plane, c, plane);
                      GX.noalias() += W * GC;
                    }
                    if (gi[1]) {
                      MapM GW(gi[1]->data(), c, okk);
                      GW.noalias() += MapC(x.data().data() + i * c * plane, c, plane) * GC.transpose();
                    }
                    if (gi.size() > 2 && gi[2]) {
                      for (std::size_t oc = 0; oc < o; ++oc) {
                        double s = 0.0;
                        for (std::size_t p = 0; p < ho * wo; ++p) s += gimg[oc * ho * wo + p];
                        (*gi[2])[oc] += s;
                      }
                    }
                  }
                });
}

Tensor normalize_batch(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormStats& stats,
                       bool training) {
  if (x.rank() < 2) throw TensorError("normalize_batch: need [N,F,...] input, got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1);
  const std::size_t inner = x.numel() / (n * f);
  if (gamma.shape() != Shape{f} || beta.shape() != Shape{f} || stats.mean.size() != f || stats.var.size() != f) {
    throw TensorError("normalize_batch: parameter shapes do not match " + std::to_string(f) + " features");
  }
  const bool batch_stats = training && n > 1;
  const double count = static_cast<double>(n * inner);
  const auto xv = x.data();

  std::vector<double> mu(f), inv_std(f);
  for (std::size_t j = 0; j < f; ++j) {
    if (batch_stats) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) s += xv[(i * f + j) * inner + p];
      const double m = s / count;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const double d = xv[(i * f + j) * inner + p] - m;
          ss += d * d;
        }
      const double var = ss / count;
      mu[j] = m;
      inv_std[j] = 1.0 / std::sqrt(var + stats.eps);
      const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
      stats.mean[j] = (1.0 - stats.momentum) * stats.mean[j] + stats.momentum * m;
      stats.var[j] = (1.0 - stats.momentum) * stats.var[j] + stats.momentum * unbiased;
    } else {
      mu[j] = stats.mean[j];
      inv_std[j] = 1.0 / std::sqrt(stats.var[j] + stats.eps);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j)
      for (std::size_t p = 0; p < inner; ++p) {
        const std::size_t idx = (i * f + j) * inner + p;
        xhat[idx] = (xv[idx] - mu[j]) * inv_std[j];
        out[idx] = gamma[j] * xhat[idx] + beta[j];
      }

  auto saved = std::make_shared<const std::vector<double>>(std::move(xhat));
  const std::array<Tensor, 3> in{x, gamma, beta};
  return finish(OpKind::NormalizeBatch, in, x.shape(), std::move(out),
                [gamma, saved, inv_std, n, f, inner, count, batch_stats](std::span<const double> go,
                                                                         std::span<std::vector<double>*> gi) {
                  const auto& xh = *saved;
                  for (std::size_t j = 0; j < f; ++j) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t p = 0; p < inner; ++p) {
                        const std::size_t idx = (i * f + j) * inner + p;
                        sum_g += go[idx];
                        sum_gx += go[idx] * xh[idx];
                      }
                    if (gi[1]) (*gi[1])[j] += sum_gx;
                    if (gi[2]) (*gi[2])[j] += sum_g;
                    if (!gi[0]) continue;
                    const double gscale = gamma[j] * inv_std[j];
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t p = 0; p < inner; ++p) {
                        const std::size_t idx = (i * f + j) * inner + p;
                        double d = go[idx];
                        if (batch_stats) d -= (sum_g + xh[idx] * sum_gx) / count;
                        (*gi[0])[idx] += gscale * d;
                      }
                  }
                });
}

Tensor kl_to_uniform_hist(const Tensor& a, SoftHistogram hist) {
  if (hist.bins == 0 || !(hist.tau > 0.0)) throw TensorError("kl_to_uniform_hist: need bins >= 1 and tau > 0");
  const std::size_t nb = hist.bins;
  const std::size_t n = a.numel();
  const auto av = a.data();
  for (double v : av) {
    if (v < 0.0 || v > 1.0) throw TensorError("kl_to_uniform_hist: values must lie in [0, 1]");
  }
  constexpr double kFloor = 1e-12;
  const double inv2t2 = 1.0 / (2.0 * hist.tau * hist.tau);
  auto center = [nb](std::size_t b) { return (static_cast<double>(b) + 0.5) / static_cast<double>(nb); };

  // q[i*nb+b]: per-value normalized kernel weights.
  std::vector<double> q(n * nb);
  std::vector<double> p(nb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    double dmin = 1e300;
    for (std::size_t b = 0; b < nb; ++b) dmin = std::min(dmin, (av[i] - center(b)) * (av[i] - center(b)));
    for (std::size_t b = 0; b < nb; ++b) {
      const double d = av[i] - center(b);
      // Shift by the nearest-bin distance so the largest weight is exactly 1.
      q[i * nb + b] = std::exp(-(d * d - dmin) * inv2t2);
      s += q[i * nb + b];
    }
    for (std::size_t b = 0; b < nb; ++b) {
      q[i * nb + b] /= s;
      p[b] += q[i * nb + b] / static_cast<double>(n);
    }
  }
  const double norm = 1.0 + static_cast<double>(nb) * kFloor;
  double kl = 0.0;
  std::vector<double> dkl_dp(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const double pb = (p[b] + kFloor) / norm;
    kl += pb * std::log(pb * static_cast<double>(nb));
    dkl_dp[b] = (std::log(pb * static_cast<double>(nb)) + 1.0) / norm;
  }

  auto saved = std::make_shared<const std::vector<double>>(std::move(q));
  const std::array<Tensor, 1> in{a};
  return finish(OpKind::KlToUniformHist, in, {1}, {kl},
                [a, saved, dkl_dp, nb, n, inv2t2, center](std::span<const double> go,
                                                          std::span<std::vector<double>*> gi) {
                  const auto av = a.data();
                  const auto& q = *saved;
                  auto& g = *gi[0];
                  for (std::size_t i = 0; i < n; ++i) {
                    // dq_b/dx = q_b (s_b - sum_c q_c s_c), s_b = -(x - c_b)/tau^2.
                    double qs = 0.0;
                    for (std::size_t b = 0; b < nb; ++b) qs += q[i * nb + b] * (-(av[i] - center(b)) * 2.0 * inv2t2);
                    double d = 0.0;
                    for (std::size_t b = 0; b < nb; ++b) {
                      const double sb = -(av[i] - center(b)) * 2.0 * inv2t2;
                      d += dkl_dp[b] * q[i * nb + b] * (sb - qs) / static_cast<double>(n);
                    }
                    g[i] += go[0] * d;
                  }
                });
}

}  // namespace ltrv
