#include "ltrv/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ltrv {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBallVolume = 4.0 * kPi / 3.0;

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) for m >= 0.
double sh_norm(int l, int m) {
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * std::exp(std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0)));
}

struct Spherical {
  double r, theta, phi;
};

Spherical to_spherical(const Vec3& p) {
  const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  if (r == 0.0) return {0.0, 0.0, 0.0};
  double theta = std::atan2(p[1], p[0]);
  if (theta < 0.0) theta += 2.0 * kPi;
  return {r, theta, std::acos(std::clamp(p[2] / r, -1.0, 1.0))};
}

void check_grid(const SphGrid& g) {
  if (g.B < 1 || g.values.size() != static_cast<std::size_t>(4 * g.B * g.B)) {
    throw std::invalid_argument("SphGrid: values must hold 2B x 2B samples");
  }
}

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

struct WeightedPoints {
  std::vector<Vec3> points;
  std::vector<double> weights;
};

// Moments for every valid index up to n_max, or only for `only` when given.
ZernikeCoeffs moments_from(const WeightedPoints& wp, const std::vector<double>& f, int n_max, bool with_error,
                           const std::array<int, 3>* only = nullptr) {
  ZernikeCoeffs out = ZernikeCoeffs::zeros(n_max);
  const std::size_t n = wp.points.size();
  std::vector<Spherical> sph(n);
  for (std::size_t i = 0; i < n; ++i) sph[i] = to_spherical(wp.points[i]);
  std::vector<double> radial(n);
  for (int nn = 0; nn <= n_max; ++nn) {
    for (int l = nn % 2; l <= nn; l += 2) {
      if (only && ((*only)[0] != nn || (*only)[1] != l)) continue;
      for (std::size_t i = 0; i < n; ++i) radial[i] = zernike_radial(nn, l, std::min(sph[i].r, 1.0));
      for (int m = -l; m <= l; ++m) {
        if (only && (*only)[2] != m) continue;
        Complex sum = 0.0;
        double sum_abs2 = 0.0;
        Complex sum_plain = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const Complex term = f[i] * radial[i] * std::conj(sph_harmonic(l, m, sph[i].theta, sph[i].phi));
          sum += wp.weights[i] * term;
          sum_plain += term;
          sum_abs2 += std::norm(term);
        }
        const std::size_t idx = ZernikeCoeffs::index(nn, l, m);
        out.values[idx] = sum / kZernikeNorm;
        if (with_error && n > 1) {
          // Plain Monte-Carlo error; stratification only makes the true error smaller.
          const double dn = static_cast<double>(n);
          const double var = std::max(0.0, (sum_abs2 - std::norm(sum_plain) / dn) / (dn - 1.0));
          out.std_error[idx] = kBallVolume * std::sqrt(var / dn) / kZernikeNorm;
        }
      }
    }
  }
  return out;
}

// One jittered point per cell of an s^3 partition of (r^3, cos phi, theta),
// which maps the unit cube to the ball with constant Jacobian.
WeightedPoints stratified_ball(std::size_t samples, Rng& rng) {
  if (samples == 0) throw std::invalid_argument("zernike_moment: empty sample set");
  std::size_t s = static_cast<std::size_t>(std::cbrt(static_cast<double>(samples)));
  while ((s + 1) * (s + 1) * (s + 1) <= samples) ++s;
  while (s > 1 && s * s * s > samples) --s;
  const std::size_t cells = s * s * s;
  std::vector<std::size_t> per_cell(cells, samples / cells);
  for (std::size_t c = 0; c < samples % cells; ++c) ++per_cell[c];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WeightedPoints wp;
  wp.points.reserve(samples);
  wp.weights.reserve(samples);
  const double ds = static_cast<double>(s);
  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t a = c / (s * s), b = (c / s) % s, d = c % s;
    for (std::size_t k = 0; k < per_cell[c]; ++k) {
      const double r = std::cbrt((static_cast<double>(a) + u(rng)) / ds);
      const double cp = 1.0 - 2.0 * (static_cast<double>(b) + u(rng)) / ds;
      const double th = 2.0 * kPi * (static_cast<double>(d) + u(rng)) / ds;
      const double sp = std::sqrt(std::max(0.0, 1.0 - cp * cp));
      wp.points.push_back({r * sp * std::cos(th), r * sp * std::sin(th), r * cp});
      wp.weights.push_back(kBallVolume / static_cast<double>(cells) / static_cast<double>(per_cell[c]));
    }
  }
  return wp;
}

std::vector<double> evaluate(const BallFunction& f, const std::vector<Vec3>& points) {
  std::vector<double> v(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) v[i] = f(points[i]);
  return v;
}

}  // namespace

double assoc_legendre(int l, int m, double x) {
  if (m < 0 || m > l) throw std::invalid_argument("assoc_legendre: need 0 <= m <= l");
  if (!(std::abs(x) <= 1.0)) throw std::invalid_argument("assoc_legendre: |x| must be <= 1");
  // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
  double pmm = 1.0;
  const double s = std::sqrt((1.0 - x) * (1.0 + x));
  for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0) * s;
  if (l == m) return pmm;
  double prev = pmm, cur = x * (2.0 * m + 1.0) * pmm;
  for (int k = m + 1; k < l; ++k) {
    const double next = ((2.0 * k + 1.0) * x * cur - (k + m) * prev) / (k + 1.0 - m);
    prev = cur;
    cur = next;
  }
  return cur;
}

Complex sph_harmonic(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) throw std::invalid_argument("sph_harmonic: need |m| <= l");
  const int am = std::abs(m);
  const double sign = am % 2 ? -1.0 : 1.0;
  const Complex y =
      sign * sh_norm(l, am) * assoc_legendre(l, am, std::cos(phi)) * std::polar(1.0, am * theta);
  return m >= 0 ? y : sign * std::conj(y);
}

SphGrid SphGrid::zeros(int B) {
  if (B < 1) throw std::invalid_argument("SphGrid: B must be >= 1");
  return SphGrid{B, std::vector<Complex>(static_cast<std::size_t>(4 * B * B))};
}

double SphGrid::phi(int j) const { return kPi * (2.0 * j + 1.0) / (4.0 * B); }
double SphGrid::theta(int k) const { return 2.0 * kPi * k / (2.0 * B); }

SphCoeffs SphCoeffs::zeros(int L) {
  if (L < 0) throw std::invalid_argument("SphCoeffs: L must be >= 0");
  return SphCoeffs{L, std::vector<Complex>(static_cast<std::size_t>((L + 1) * (L + 1)))};
}

Complex& SphCoeffs::at(int l, int m) {
  if (l < 0 || l > L || std::abs(m) > l) throw std::out_of_range("SphCoeffs: index out of range");
  return values[index(l, m)];
}

const Complex& SphCoeffs::at(int l, int m) const {
  if (l < 0 || l > L || std::abs(m) > l) throw std::out_of_range("SphCoeffs: index out of range");
  return values[index(l, m)];
}

std::vector<double> sph_quadrature_weights(int B) {
  if (B < 1) throw std::invalid_argument("sph_quadrature_weights: B must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(2 * B));
  for (int j = 0; j < 2 * B; ++j) {
    const double phi = kPi * (2.0 * j + 1.0) / (4.0 * B);
    double s = 0.0;
    for (int k = 0; k < B; ++k) s += std::sin((2.0 * k + 1.0) * phi) / (2.0 * k + 1.0);
    w[static_cast<std::size_t>(j)] = 2.0 / B * std::sin(phi) * s;
  }
  return w;
}

SphCoeffs sh_analyze(const SphGrid& grid, int L) {
  check_grid(grid);
  if (L < 0 || L > grid.B - 1) throw std::invalid_argument("sh_analyze: need 0 <= L <= B - 1");
  const int n = grid.extent();
  const std::vector<double> w = sph_quadrature_weights(grid.B);
  const double dtheta = 2.0 * kPi / n;
  SphCoeffs out = SphCoeffs::zeros(L);
  for (int m = 0; m <= L; ++m) {
    // Fourier coefficient of each row at frequency +m and -m.
    std::vector<Complex> fp(static_cast<std::size_t>(n)), fm(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Complex e = std::polar(1.0, -m * grid.theta(k));
        fp[static_cast<std::size_t>(j)] += grid.at(j, k) * e;
        fm[static_cast<std::size_t>(j)] += grid.at(j, k) * std::conj(e);
      }
    }
    const double sign = m % 2 ? -1.0 : 1.0;
    for (int l = m; l <= L; ++l) {
      Complex sp = 0.0, sm = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p = sign * sh_norm(l, m) * assoc_legendre(l, m, std::cos(grid.phi(j))) * w[static_cast<std::size_t>(j)];
        sp += p * fp[static_cast<std::size_t>(j)];
        sm += p * fm[static_cast<std::size_t>(j)];
      }
      out.at(l, m) = sp * dtheta;
      // conj(Y_{l,-m}) = sign * Y_{l,m} restricted to e^{-i m theta}
      if (m > 0) out.at(l, -m) = sign * sm * dtheta;
    }
  }
  return out;
}

SphGrid sh_synthesize(const SphCoeffs& coeffs, int B) {
  if (coeffs.values.size() != static_cast<std::size_t>((coeffs.L + 1) * (coeffs.L + 1))) {
    throw std::invalid_argument("sh_synthesize: coefficient table has the wrong size");
  }
  if (B < coeffs.L + 1) throw std::invalid_argument("sh_synthesize: need B >= L + 1");
  SphGrid g = SphGrid::zeros(B);
  for (int j = 0; j < g.extent(); ++j)
    for (int k = 0; k < g.extent(); ++k) {
      Complex s = 0.0;
      for (int l = 0; l <= coeffs.L; ++l)
        for (int m = -l; m <= l; ++m) s += coeffs.at(l, m) * sph_harmonic(l, m, g.theta(k), g.phi(j));
      g.at(j, k) = s;
    }
  return g;
}

bool zernike_valid(int n, int l, int m) { return n >= 0 && l >= 0 && l <= n && (n - l) % 2 == 0 && std::abs(m) <= l; }

double zernike_q(int n, int l, int v) {
  if (n < 0 || l < 0 || l > n) throw std::invalid_argument("zernike_q: need 0 <= l <= n");
  if ((n - l) % 2) throw std::invalid_argument("zernike_q: n - l must be even");
  const int k = (n - l) / 2;
  if (v < 0 || v > k) throw std::invalid_argument("zernike_q: v out of range");
  const double sign = ((k + v) % 2) ? -1.0 : 1.0;
  const double log_mag = log_binom(n - l, k) + log_binom(k, v) + log_binom(2 * (k + l + v) + 1, n - l) -
                         log_binom(k + l + v, k) - (n - l) * std::log(2.0);
  return sign * std::sqrt((2.0 * n + 3.0) / 3.0) * std::exp(log_mag);
}

double zernike_radial(int n, int l, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("zernike_radial: r must lie in [0, 1]");
  const int k = (n - l) / 2;
  double s = 0.0;
  for (int v = k; v >= 0; --v) s = s * r * r + zernike_q(n, l, v);
  return s * std::pow(r, l);
}

Complex zernike_basis(int n, int l, int m, const Vec3& p) {
  if (!zernike_valid(n, l, m)) throw std::invalid_argument("zernike_basis: invalid index");
  const Spherical s = to_spherical(p);
  if (s.r > 1.0 + 1e-12) throw std::invalid_argument("zernike_basis: point outside the unit ball");
  return zernike_radial(n, l, std::min(s.r, 1.0)) * sph_harmonic(l, m, s.theta, s.phi);
}

std::size_t ZernikeCoeffs::count(int n_max) {
  std::size_t c = 0;
  for (int n = 0; n <= n_max; ++n)
    for (int l = n % 2; l <= n; l += 2) c += static_cast<std::size_t>(2 * l + 1);
  return c;
}

std::size_t ZernikeCoeffs::index(int n, int l, int m) {
  if (!zernike_valid(n, l, m)) throw std::out_of_range("ZernikeCoeffs: invalid index");
  std::size_t c = n > 0 ? count(n - 1) : 0;
  for (int ll = n % 2; ll < l; ll += 2) c += static_cast<std::size_t>(2 * ll + 1);
  return c + static_cast<std::size_t>(l + m);
}

ZernikeCoeffs ZernikeCoeffs::zeros(int n_max) {
  if (n_max < 0) throw std::invalid_argument("ZernikeCoeffs: n_max must be >= 0");
  return ZernikeCoeffs{n_max, std::vector<Complex>(count(n_max)), std::vector<double>(count(n_max), 0.0)};
}

Complex& ZernikeCoeffs::at(int n, int l, int m) {
  if (n > n_max) throw std::out_of_range("ZernikeCoeffs: n above n_max");
  return values[index(n, l, m)];
}

const Complex& ZernikeCoeffs::at(int n, int l, int m) const {
  if (n > n_max) throw std::out_of_range("ZernikeCoeffs: n above n_max");
  return values[index(n, l, m)];
}

MomentEstimate zernike_moment(const BallFunction& f, int n, int l, int m, std::size_t samples, Rng& rng) {
  if (!zernike_valid(n, l, m)) throw std::invalid_argument("zernike_moment: invalid index");
  const WeightedPoints wp = stratified_ball(samples, rng);
  const std::array<int, 3> idx{n, l, m};
  const ZernikeCoeffs c = moments_from(wp, evaluate(f, wp.points), n, true, &idx);
  const std::size_t i = ZernikeCoeffs::index(n, l, m);
  return {c.values[i] * kZernikeNorm, c.std_error[i] * kZernikeNorm};
}

MomentEstimate zernike_moment(const std::vector<Vec3>& points, const std::vector<double>& values, int n, int l,
                              int m) {
  if (points.empty()) throw std::invalid_argument("zernike_moment: empty sample set");
  if (points.size() != values.size()) throw std::invalid_argument("zernike_moment: points and values differ in size");
  if (!zernike_valid(n, l, m)) throw std::invalid_argument("zernike_moment: invalid index");
  WeightedPoints wp{points, std::vector<double>(points.size(), kBallVolume / static_cast<double>(points.size()))};
  const std::array<int, 3> idx{n, l, m};
  const ZernikeCoeffs c = moments_from(wp, values, n, true, &idx);
  const std::size_t i = ZernikeCoeffs::index(n, l, m);
  return {c.values[i] * kZernikeNorm, c.std_error[i] * kZernikeNorm};
}

ZernikeCoeffs zernike_moments(const BallFunction& f, int n_max, std::size_t samples, Rng& rng) {
  if (n_max < 0) throw std::invalid_argument("zernike_moments: n_max must be >= 0");
  const WeightedPoints wp = stratified_ball(samples, rng);
  return moments_from(wp, evaluate(f, wp.points), n_max, true);
}

ZernikeCoeffs zernike_moments_quadrature(const BallFunction& f, int n_max, int nodes) {
  if (n_max < 0 || nodes < 1) throw std::invalid_argument("zernike_moments_quadrature: bad arguments");
  std::vector<double> x, w;
  gauss_legendre(nodes, x, w);
  const int nt = 2 * nodes;
  WeightedPoints wp;
  for (int a = 0; a < nodes; ++a) {
    const double r = 0.5 * (x[a] + 1.0), wr = 0.5 * w[a] * r * r;
    for (int b = 0; b < nodes; ++b) {
      const double cp = x[b], sp = std::sqrt(std::max(0.0, 1.0 - cp * cp));
      for (int k = 0; k < nt; ++k) {
        const double th = 2.0 * kPi * k / nt;
        wp.points.push_back({r * sp * std::cos(th), r * sp * std::sin(th), r * cp});
        wp.weights.push_back(wr * w[b] * 2.0 * kPi / nt);
      }
    }
  }
  return moments_from(wp, evaluate(f, wp.points), n_max, false);
}

double zernike_reconstruct(const ZernikeCoeffs& coeffs, const Vec3& p) {
  const Spherical s = to_spherical(p);
  const double r = std::min(s.r, 1.0);
  Complex sum = 0.0;
  for (int n = 0; n <= coeffs.n_max; ++n)
    for (int l = n % 2; l <= n; l += 2) {
      const double rad = zernike_radial(n, l, r);
      for (int m = -l; m <= l; ++m) sum += coeffs.at(n, l, m) * rad * sph_harmonic(l, m, s.theta, s.phi);
    }
  return sum.real();
}

std::vector<double> zernike_reconstruct(const ZernikeCoeffs& coeffs, const std::vector<Vec3>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(zernike_reconstruct(coeffs, p));
  return out;
}

SphGrid pointcloud_to_sphere_fn(const std::vector<Vec3>& points, int B) {
  if (points.empty()) throw std::invalid_argument("pointcloud_to_sphere_fn: empty point cloud");
  SphGrid g = SphGrid::zeros(B);
  const int n = g.extent();
  for (const Vec3& p : points) {
    const Spherical s = to_spherical(p);
    if (s.r > 1.0 + 1e-9) throw std::invalid_argument("pointcloud_to_sphere_fn: point outside the unit ball");
    const int j = std::clamp(static_cast<int>(s.phi / kPi * n), 0, n - 1);
    const int k = std::clamp(static_cast<int>(s.theta / (2.0 * kPi) * n), 0, n - 1);
    if (s.r > g.at(j, k).real()) g.at(j, k) = s.r;
  }
  return g;
}

SpectralMap make_spectral_map(const SphCoeffs& coeffs) {
  const std::size_t count = coeffs.values.size();
  std::size_t side = 1;
  while (side * side < count) ++side;
  SpectralMap map{side, std::vector<double>(side * side), std::vector<double>(side * side),
                  std::vector<double>(side * side), 0.0};
  for (std::size_t i = 0; i < count; ++i) {
    map.real[i] = coeffs.values[i].real();
    map.imag[i] = coeffs.values[i].imag();
  }
  return map;
}

SphCoeffs map_to_coeffs(const SpectralMap& map, int L) {
  SphCoeffs c = SphCoeffs::zeros(L);
  if (c.values.size() > map.side * map.side || map.real.size() != map.side * map.side ||
      map.imag.size() != map.real.size()) {
    throw std::invalid_argument("map_to_coeffs: map too small for L");
  }
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] = Complex(map.real[i], map.imag[i]);
  return c;
}

SpectralMap corrupt_map(const SpectralMap& map, double sigma, double mask_fraction, Rng& rng) {
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) throw std::invalid_argument("corrupt_map: mask fraction must lie in [0, 1]");
  if (!(sigma >= 0.0)) throw std::invalid_argument("corrupt_map: sigma must be >= 0");
  SpectralMap out = map;
  out.noise_sigma = sigma;
  const std::size_t cells = map.side * map.side;
  out.mask.assign(cells, 0.0);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t i = 0; i < cells; ++i) {
      out.real[i] += noise(rng);
      out.imag[i] += noise(rng);
    }
  }
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = cells; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto masked = static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(cells)));
  for (std::size_t i = 0; i < masked; ++i) {
    out.real[order[i]] = 0.0;
    out.imag[order[i]] = 0.0;
    out.mask[order[i]] = 1.0;
  }
  return out;
}

void SpectralMap::export_to(NamedTensors& out) const {
  out.set("specmap/real", Tensor({side, side}, real));
  out.set("specmap/imag", Tensor({side, side}, imag));
  out.set("specmap/mask", Tensor({side, side}, mask));
}

SpectralMap SpectralMap::import_from(const NamedTensors& in) {
  const Tensor& re = in.get("specmap/real");
  const Tensor& im = in.get("specmap/imag");
  const Tensor& mk = in.get("specmap/mask");
  if (re.rank() != 2 || re.dim(0) != re.dim(1) || im.shape() != re.shape() || mk.shape() != re.shape()) {
    throw FormatError("specmap: expected three square maps of equal shape");
  }
  return SpectralMap{re.dim(0), re.to_vector(), im.to_vector(), mk.to_vector(), 0.0};
}

std::vector<Vec3> read_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_off: cannot open " + path.string());
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  std::string line;
  if (!next_line(line)) throw FormatError("read_off: empty file");
  std::istringstream head(line);
  std::string magic;
  head >> magic;
  if (magic.rfind("OFF", 0) != 0) throw FormatError("read_off: missing OFF header");
  std::size_t nv = 0, nf = 0, ne = 0;
  // Some writers put the counts on the header line itself ("OFF 8 6 0").
  if (magic.size() > 3) {
    std::istringstream rest(magic.substr(3));
    rest >> nv;
    head >> nf >> ne;
  } else if (!(head >> nv >> nf >> ne)) {
    if (!next_line(line)) throw FormatError("read_off: missing counts");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf >> ne)) throw FormatError("read_off: bad counts line");
  }
  std::vector<Vec3> pts;
  pts.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_line(line)) throw FormatError("read_off: truncated vertex list");
    std::istringstream v(line);
    Vec3 p{};
    if (!(v >> p[0] >> p[1] >> p[2])) throw FormatError("read_off: bad vertex line");
    pts.push_back(p);
  }
  return pts;
}

std::vector<Vec3> read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_xyz: cannot open " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream v(line);
    Vec3 p{};
    if (!(v >> p[0] >> p[1] >> p[2])) throw FormatError("read_xyz: bad line " + std::to_string(lineno));
    pts.push_back(p);
  }
  return pts;
}

std::vector<Vec3> normalize_to_unit_ball(std::vector<Vec3> points) {
  if (points.empty()) throw std::invalid_argument("normalize_to_unit_ball: empty point cloud");
  Vec3 c{0.0, 0.0, 0.0};
  for (const Vec3& p : points)
    for (int i = 0; i < 3; ++i) c[i] += p[i];
  for (double& v : c) v /= static_cast<double>(points.size());
  double rmax = 0.0;
  for (Vec3& p : points) {
    for (int i = 0; i < 3; ++i) p[i] -= c[i];
    rmax = std::max(rmax, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  if (rmax > 0.0)
    for (Vec3& p : points)
      for (double& v : p) v /= rmax;
  return points;
}

}  // namespace ltrv
