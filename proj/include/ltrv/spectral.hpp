#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <vector>

#include "ltrv/checkpoint.hpp"
#include "ltrv/datasets.hpp"
#include "ltrv/latent.hpp"

namespace ltrv {

using Complex = std::complex<double>;

/// P_l^m(x) with the Condon-Shortley phase, by upward recurrence in l.
double assoc_legendre(int l, int m, double x);

/// Y_{l,m}(theta, phi); theta is the azimuth, phi the polar angle. The extra
/// (-1)^m cancels the phase inside P_l^m. m < 0 uses Y_{l,-m} = (-1)^m conj(Y_{l,m}).
Complex sph_harmonic(int l, int m, double theta, double phi);

/// 2B x 2B equiangular samples: row j at phi_j = pi (2j + 1) / (4B), column k
/// at theta_k = 2 pi k / (2B).
struct SphGrid {
  int B = 0;
  std::vector<Complex> values;

  static SphGrid zeros(int B);
  int extent() const { return 2 * B; }
  Complex& at(int j, int k) { return values[static_cast<std::size_t>(j * 2 * B + k)]; }
  const Complex& at(int j, int k) const { return values[static_cast<std::size_t>(j * 2 * B + k)]; }
  double phi(int j) const;
  double theta(int k) const;
};

/// Coefficients f(l, m) for l <= L, stored at l^2 + l + m.
struct SphCoeffs {
  int L = 0;
  std::vector<Complex> values;

  static SphCoeffs zeros(int L);
  static std::size_t index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }
  Complex& at(int l, int m);
  const Complex& at(int l, int m) const;
};

/// Driscoll-Healy polar weights for the grid rows; exact for band-limited products.
std::vector<double> sph_quadrature_weights(int B);

SphCoeffs sh_analyze(const SphGrid& grid, int L);
SphGrid sh_synthesize(const SphCoeffs& coeffs, int B);

double zernike_q(int n, int l, int v);
double zernike_radial(int n, int l, double r);
/// Z_{n,l,m} = R_{n,l}(r) Y_{l,m} at a point of the unit ball.
Complex zernike_basis(int n, int l, int m, const Vec3& p);
bool zernike_valid(int n, int l, int m);

/// Squared norm of every Z_{n,l,m} over the ball (1/3 with orthonormal Y).
inline constexpr double kZernikeNorm = 1.0 / 3.0;

/// Coefficients Omega / ||Z||^2 for every valid (n, l, m) with n <= n_max, so a
/// pure basis function gives a one-hot table.
struct ZernikeCoeffs {
  int n_max = 0;
  std::vector<Complex> values;
  std::vector<double> std_error;  // Monte-Carlo standard error, 0 for quadrature

  static ZernikeCoeffs zeros(int n_max);
  static std::size_t count(int n_max);
  static std::size_t index(int n, int l, int m);
  Complex& at(int n, int l, int m);
  const Complex& at(int n, int l, int m) const;
};

using BallFunction = std::function<double(const Vec3&)>;

struct MomentEstimate {
  Complex value;
  double std_error = 0.0;
};

inline constexpr std::size_t kZernikeSamples = 100000;

/// Omega_{n,l,m}(f) = integral over the ball of f conj(Z), stratified Monte-Carlo.
MomentEstimate zernike_moment(const BallFunction& f, int n, int l, int m, std::size_t samples, Rng& rng);
/// Same integral from given points and values, each point carrying volume 4 pi / (3 N).
MomentEstimate zernike_moment(const std::vector<Vec3>& points, const std::vector<double>& values, int n, int l,
                              int m);

ZernikeCoeffs zernike_moments(const BallFunction& f, int n_max, std::size_t samples, Rng& rng);
/// Tensor-product Gauss rule (radius, cos phi) with uniform theta; exact for polynomial f of low degree.
ZernikeCoeffs zernike_moments_quadrature(const BallFunction& f, int n_max, int nodes = 24);

double zernike_reconstruct(const ZernikeCoeffs& coeffs, const Vec3& p);
std::vector<double> zernike_reconstruct(const ZernikeCoeffs& coeffs, const std::vector<Vec3>& points);

/// Radial support function: largest radius per (phi, theta) bin, 0 where empty.
SphGrid pointcloud_to_sphere_fn(const std::vector<Vec3>& points, int B);

/// Square map of coefficients in (l, m) raster order, zero padded.
struct SpectralMap {
  std::size_t side = 0;
  std::vector<double> real;
  std::vector<double> imag;
  std::vector<double> mask;  // 1 where the cell was masked out
  double noise_sigma = 0.0;

  void export_to(NamedTensors& out) const;
  static SpectralMap import_from(const NamedTensors& in);
};

SpectralMap make_spectral_map(const SphCoeffs& coeffs);
SphCoeffs map_to_coeffs(const SpectralMap& map, int L);
/// Gaussian noise on both channels, then round(fraction * cells) cells set to zero.
SpectralMap corrupt_map(const SpectralMap& map, double sigma, double mask_fraction, Rng& rng);

std::vector<Vec3> read_off(const std::filesystem::path& path);
std::vector<Vec3> read_xyz(const std::filesystem::path& path);
/// Centers on the centroid and scales the farthest point to radius 1.
std::vector<Vec3> normalize_to_unit_ball(std::vector<Vec3> points);

}  // namespace ltrv
