#pragma once

// Generators for rough coefficients and initial data: a truncated fractal
// cosine series (Weierstrass-type), piecewise-linear hats, random hat sums,
// and a periodic log-normal random field synthesized spectrally.  Plus
// mollification, block-average coarsening, and positivity bounds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "roughwave/grid_ops.hpp"

namespace roughwave {

namespace detail {

// Seedable generator with a pinned draw discipline so every study is
// bit-reproducible from its seed:
//   - raw: one mt19937_64 output word
//   - uniform01(): (raw >> 11) * 2^-53, exactly one raw draw, range [0, 1)
//   - uniform(a, b): a + (b - a) * uniform01(), one raw draw
//   - normal(): Box-Muller; each pair of normals consumes exactly two raw
//     draws (the second value is cached), using u1 = 1 - uniform01() in (0, 1]
//     so the draw count never varies.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  std::mt19937_64 engine_;
  double spare_{0.0};
  bool have_spare_{false};
};

// cos(pi * t) for t in (-2, 2), exact at even and odd integers.  The exact
// branches matter: the fractal series below relies on cos being exactly +1
// once its doubled argument collapses onto an even integer.
inline double cos_pi(double t) {
  if (t > 1.0) t -= 2.0;
  else if (t <= -1.0) t += 2.0;
  if (t == 0.0) return 1.0;
  if (t == 1.0 || t == -1.0) return -1.0;
  return std::cos(std::numbers::pi * t);
}

// FFTW's planner mutates global state; serialize plan creation/destruction.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// ---------------------------------------------------------- coefficient ---

struct Coefficient {
  GridFunction values;
  double lower_bound{0.0};
  double upper_bound{0.0};
  std::optional<double> holder_exponent_hint{};
};

// (min, max) of the values; throws PositivityViolation naming the first
// offending cell when min <= 0 (strictly positive fields only).
inline std::pair<double, double> bounds(const GridFunction& values) {
  if (values.values.empty()) throw InvalidArgument("bounds: empty grid function");
  double lo = values.values[0];
  double hi = values.values[0];
  for (std::size_t j = 0; j < values.values.size(); ++j) {
    const double v = values.values[j];
    if (!(v > 0.0)) {
      throw PositivityViolation("bounds: non-positive value " + detail::format_double(v) +
                                " in cell " + std::to_string(j));
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

inline Coefficient make_coefficient(GridFunction values,
                                    std::optional<double> holder_exponent_hint = {}) {
  const auto [lo, hi] = bounds(values);
  return Coefficient{std::move(values), lo, hi, holder_exponent_hint};
}

// ------------------------------------------------------- fractal series ---

struct WeierstrassSpec {
  double gamma{1.0};
  int num_terms{400};
  double offset{0.0};
};

// Default offset rule: 0.1 plus the full weight sum, which bounds the series
// from below by 0.1 regardless of the cosine signs.
inline double default_weierstrass_offset(double gamma, int num_terms = 400) {
  const double r = std::exp2(-gamma);
  return 0.1 + (r - std::pow(r, num_terms + 1)) / (1.0 - r);
}

inline WeierstrassSpec make_weierstrass_spec(double gamma, int num_terms = 400) {
  return WeierstrassSpec{gamma, num_terms, default_weierstrass_offset(gamma, num_terms)};
}

// sum_{n=1}^{N} 2^(-gamma n) cos(2^n pi x) + offset.
//
// The argument 2^n x is reduced modulo 2 by exact doubling: t_n = fmod(2
// t_{n-1}, 2) stays in (-2, 2), both the multiply and fmod are exact, so t_n
// is the true value of 2^n x mod 2 with no rounding at any n.  Every double
// has finitely many fractional bits, so t_n eventually hits exactly 0; from
// that term on cos == 1 and the remaining weights are added as a closed-form
// geometric tail.  This is a pure evaluation speedup — the summed value is
// the same, only without rounding noise from ~350 additions of +1 terms.
inline double weierstrass(const WeierstrassSpec& spec, double x) {
  if (!(spec.gamma > 0.0 && spec.gamma <= 1.0)) {
    throw InvalidArgument("weierstrass: gamma must lie in (0, 1]");
  }
  if (spec.num_terms < 1) {
    throw InvalidArgument("weierstrass: num_terms must be at least 1");
  }
  const double r = std::exp2(-spec.gamma);
  double sum = 0.0;
  double weight = 1.0;
  double t = std::fmod(x, 2.0);
  for (int n = 1; n <= spec.num_terms; ++n) {
    t = std::fmod(2.0 * t, 2.0);
    weight *= r;
    if (t == 0.0) {
      // Geometric tail: sum_{m=n}^{N} r^m = (r^n - r^(N+1)) / (1 - r).
      sum += (weight - std::pow(r, spec.num_terms + 1)) / (1.0 - r);
      break;
    }
    sum += weight * detail::cos_pi(t);
  }
  return sum + spec.offset;
}

// ------------------------------------------------------------------ hats ---

// Periodic piecewise-linear zigzag on [0, 2): 0 at the integers, peaks of
// value 1 at x = 1/2 and x = 3/2, slopes +-2.  Arguments outside [0, 2) are
// reduced modulo 2.
inline double hat(double x) {
  double t = std::fmod(x, 2.0);
  if (t < 0.0) t += 2.0;
  if (t < 0.5) return 1.0 + 2.0 * (t - 0.5);
  if (t < 1.0) return 1.0 - 2.0 * (t - 0.5);
  if (t < 1.5) return 1.0 + 2.0 * (t - 1.5);
  return 1.0 - 2.0 * (t - 1.5);
}

// One random bump: zero outside (x0, x2], rising linearly to peak q at x1.
struct HatBump {
  double q{0.0};
  double x0{0.0};
  double x1{0.0};
  double x2{0.0};

  double operator()(double x) const {
    if (x <= x0 || x > x2) return 0.0;
    if (x <= x1) return q * (x - x0) / (x1 - x0);
    return q * (x2 - x) / (x2 - x1);
  }
};

// Sum of `count` random bumps; deterministic for a fixed seed.
struct RandomHats {
  std::vector<HatBump> bumps;

  double operator()(double x) const {
    double s = 0.0;
    for (const HatBump& b : bumps) s += b(x);
    return s;
  }
};

// Draw order per bump (one uniform each): q ~ U(-1,1), x0 ~ U(0,1),
// x1 ~ U(x0,2), x2 ~ U(x1,2).
inline RandomHats random_hats(int count, std::uint64_t rng_seed) {
  if (count < 1) throw InvalidArgument("random_hats: count must be at least 1");
  detail::Rng rng(rng_seed);
  RandomHats out;
  out.bumps.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    HatBump b;
    b.q = rng.uniform(-1.0, 1.0);
    b.x0 = rng.uniform(0.0, 1.0);
    b.x1 = rng.uniform(b.x0, 2.0);
    b.x2 = rng.uniform(b.x1, 2.0);
    out.bumps.push_back(b);
  }
  return out;
}

// -------------------------------------------------------- log-normal field ---

struct LogNormalSpec {
  double correlation_length{0.1};
  double variance{0.5};
  double mean_log{0.0};
  std::uint64_t seed{0};
};

// Periodic log-normal field exp(mean_log + G) at cell centers, where G is a
// stationary Gaussian field with covariance variance * exp(-dist/corr_len)
// (periodic distance), synthesized by the circulant spectral method:
//   - eigenvalues = DFT of the covariance row (real, up to rounding),
//   - negative eigenvalues are clipped to zero (counted via clipped_count;
//     a documented approximation of the truncated periodic kernel),
//   - mode k gets sqrt(lambda_k / N) times a complex standard normal.
// Draw order: xi_0 (one normal), then (re, im) pairs for k = 1..N/2-1, then
// xi_{N/2} (one normal).  Requires a power-of-two cell count.
inline Coefficient lognormal_field(const LogNormalSpec& spec, const Grid& grid,
                                   int* clipped_count = nullptr) {
  if (!(spec.correlation_length > 0.0)) {
    throw InvalidArgument("lognormal_field: correlation_length must be positive");
  }
  if (spec.variance < 0.0) {
    throw InvalidArgument("lognormal_field: variance must be nonnegative");
  }
  const std::size_t n = grid.num_cells;
  if ((n & (n - 1)) != 0) {
    throw InvalidArgument("lognormal_field: num_cells must be a power of two");
  }
  if (clipped_count != nullptr) *clipped_count = 0;

  GridFunction field = make_grid_function(grid);
  if (spec.variance == 0.0) {
    std::fill(field.values.begin(), field.values.end(), std::exp(spec.mean_log));
    return make_coefficient(std::move(field), 0.5);
  }

  std::vector<double> cov(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = std::min(static_cast<double>(k) * grid.dx,
                              grid.domain_length - static_cast<double>(k) * grid.dx);
    cov[k] = spec.variance * std::exp(-d / spec.correlation_length);
  }

  const std::size_t nspec = n / 2 + 1;
  std::vector<std::complex<double>> eigen(nspec);
  std::vector<std::complex<double>> modes(nspec);
  std::vector<double> g(n);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), cov.data(),
                                         reinterpret_cast<fftw_complex*>(eigen.data()),
                                         FFTW_ESTIMATE);
    fftw_execute(fwd);
    fftw_destroy_plan(fwd);
  }

  detail::Rng rng(spec.seed);
  const double inv_n = 1.0 / static_cast<double>(n);
  auto amplitude = [&](std::size_t k) {
    double lambda = eigen[k].real();
    if (lambda < 0.0) {
      lambda = 0.0;
      if (clipped_count != nullptr) ++(*clipped_count);
    }
    return std::sqrt(lambda * inv_n);
  };
  modes[0] = amplitude(0) * rng.normal();
  const double half = std::numbers::sqrt2 / 2.0;
  for (std::size_t k = 1; k + 1 < nspec; ++k) {
    const double amp = amplitude(k);
    const double re = rng.normal();
    const double im = rng.normal();
    modes[k] = std::complex<double>(amp * re * half, amp * im * half);
  }
  modes[nspec - 1] = amplitude(nspec - 1) * rng.normal();

  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    fftw_plan bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                         reinterpret_cast<fftw_complex*>(modes.data()),
                                         g.data(), FFTW_ESTIMATE);
    fftw_execute(bwd);
    fftw_destroy_plan(bwd);
  }

  for (std::size_t j = 0; j < n; ++j) {
    field.values[j] = std::exp(spec.mean_log + g[j]);
  }
  return make_coefficient(std::move(field), 0.5);
}

// ---------------------------------------------------------- mollification ---

// Even bump kernel C exp(-1/(1 - s^2)) on (-1, 1).  The normalization makes
// the continuum integral 1; it was computed once by high-resolution
// adaptive quadrature and embedded (1 / 0.44399381616807943).
inline constexpr double mollifier_normalization = 2.2522836206907617;

inline double mollifier(double s) {
  if (!(std::abs(s) < 1.0)) return 0.0;
  return mollifier_normalization * std::exp(-1.0 / (1.0 - s * s));
}

inline constexpr std::size_t mollify_quadrature_nodes = 512;

// (f * kernel_delta)(x) by a fixed midpoint quadrature in the kernel
// variable.  The quadrature weights are normalized by their own sum, so
// constants are preserved to the last ulp of the final reduction; the even
// node layout (no node at 0, symmetric pairs) preserves even symmetry.
template <std::invocable<double> F>
auto mollify(F f, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("mollify: delta must be positive");
  std::vector<double> nodes(mollify_quadrature_nodes);
  std::vector<double> weights(mollify_quadrature_nodes);
  const double h = 2.0 / static_cast<double>(mollify_quadrature_nodes);
  for (std::size_t i = 0; i < mollify_quadrature_nodes; ++i) {
    nodes[i] = -1.0 + (static_cast<double>(i) + 0.5) * h;
    weights[i] = mollifier(nodes[i]);
  }
  const double wsum = pairwise_sum(weights);
  for (double& w : weights) w /= wsum;
  return [f = std::move(f), delta, nodes = std::move(nodes),
          weights = std::move(weights)](double x) {
    std::vector<double> terms(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      terms[i] = weights[i] * f(x - delta * nodes[i]);
    }
    return pairwise_sum(terms);
  };
}

// ------------------------------------------------------------- coarsening ---

// Block averaging onto a grid coarsened by `factor` (which must divide the
// cell count).  Each coarse value is the pairwise-tree sum of its block
// divided once by the factor, so for power-of-two factors coarsening
// composes bit-exactly: coarsen(coarsen(f, p), q) == coarsen(f, p * q).
inline GridFunction coarsen(const GridFunction& fine, std::size_t factor) {
  if (factor == 0 || fine.grid.num_cells % factor != 0) {
    throw InvalidArgument("coarsen: factor must divide the cell count");
  }
  if (factor == 1) return fine;
  const std::size_t coarse_cells = fine.grid.num_cells / factor;
  GridFunction out = make_grid_function(make_grid(fine.grid.domain_length, coarse_cells));
  const std::span<const double> v(fine.values.data(), fine.values.size());
  for (std::size_t j = 0; j < coarse_cells; ++j) {
    out.values[j] = pairwise_sum(v.subspan(j * factor, factor)) / static_cast<double>(factor);
  }
  return out;
}

}  // namespace roughwave
