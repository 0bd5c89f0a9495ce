#pragma once

// Uniform periodic 1-D grids, cell averaging, discrete difference operators
// (including fractional-exponent variants), weighted norms, and moduli of
// continuity.  All reductions run through pairwise_sum() so results are
// resolution-stable and regroup bit-exactly under power-of-two block splits
// (block averaging then re-averaging commutes exactly; rate studies depend
// on that when they divide nearly equal error numbers).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace roughwave {

// --------------------------------------------------------------- errors ---

// Argument violates a documented precondition.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// An evaluated function produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A coefficient failed strict positivity.
struct PositivityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A time step violates the stability (CFL) restriction.
struct StabilityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A reference solution is unusable (e.g. identically zero).
struct DegenerateReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed configuration input.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------------- grid ---

struct Grid {
  double domain_length{0.0};
  std::size_t num_cells{0};
  double dx{0.0};

  // Cell centers x_j = (j + 1/2) dx for j = 0..num_cells-1.
  double center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dx; }
};

inline bool same_grid(const Grid& a, const Grid& b) {
  return a.num_cells == b.num_cells && a.domain_length == b.domain_length;
}

inline Grid make_grid(double domain_length, std::size_t num_cells) {
  if (!(domain_length > 0.0) || !std::isfinite(domain_length)) {
    throw InvalidArgument("make_grid: domain_length must be positive and finite");
  }
  if (num_cells < 2) {
    throw InvalidArgument("make_grid: num_cells must be at least 2");
  }
  Grid g;
  g.domain_length = domain_length;
  g.num_cells = num_cells;
  g.dx = domain_length / static_cast<double>(num_cells);
  return g;
}

struct GridFunction {
  Grid grid;
  std::vector<double> values;
};

inline GridFunction make_grid_function(const Grid& grid, double fill = 0.0) {
  return GridFunction{grid, std::vector<double>(grid.num_cells, fill)};
}

// ------------------------------------------------------------ reductions ---

// Pairwise (tree) summation by pure recursive halving.  The strict halving
// structure (no unrolled base case) is load-bearing: summing a contiguous
// power-of-two block equals summing its two halves and adding, so block
// averages composed over power-of-two factors are bit-identical to a single
// flat average (rounding commutes with exact division by powers of two).
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n == 1) return v[0];
  if (n == 2) return v[0] + v[1];
  const std::size_t half = n / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v.data(), v.size()));
}

// Relative slack for time-step stability checks.  A step size computed as
// dx-over-speed can, after rounding, overshoot the exact stability bound by
// an ulp; checks of the form ratio <= 1 therefore allow this much relative
// headroom instead of demanding an exact inequality on rounded quotients.
inline constexpr double stability_check_slack = 1e-12;

// --------------------------------------------------------- cell averages ---

// Default subsample count for composite-midpoint cell averaging.  An odd
// count is essential for highly oscillatory integrands: with M odd, the
// composite midpoint rule integrates cos(w x) to exact_integral times
// (wh/2)/sin(wh/2), which is exactly zero whenever w dx is a multiple of
// 2*pi.  Even counts place subsample points on dyadic rationals, where every
// term cos(2^n pi x) with n beyond the sample's fractional bits collapses to
// exactly +1 and the quadrature sees a constant instead of an oscillation.
// M = 255 keeps the worst-case relative quadrature error for the bundled
// fractal generator below 1e-6; overridable per call.
inline constexpr std::size_t default_cell_average_subsamples = 255;

template <std::invocable<double> F>
GridFunction cell_average(F&& f, const Grid& grid,
                          std::size_t subsamples = default_cell_average_subsamples) {
  if (subsamples < 1) {
    throw InvalidArgument("cell_average: subsamples must be at least 1");
  }
  GridFunction out = make_grid_function(grid);
  const double h = grid.dx / static_cast<double>(subsamples);
  std::vector<double> samples(subsamples);
  for (std::size_t j = 0; j < grid.num_cells; ++j) {
    const double left = static_cast<double>(j) * grid.dx;
    for (std::size_t s = 0; s < subsamples; ++s) {
      const double x = left + (static_cast<double>(s) + 0.5) * h;
      const double fx = f(x);
      if (!std::isfinite(fx)) {
        throw NumericError("cell_average: non-finite sample in cell " + std::to_string(j));
      }
      samples[s] = fx;
    }
    out.values[j] = pairwise_sum(samples) / static_cast<double>(subsamples);
  }
  return out;
}

// ---------------------------------------------------- difference operators ---

enum class DiffKind { forward, backward, central };

// Difference quotients with fractional scaling: forward (v_{j+1}-v_j)/dx^g,
// backward (v_j-v_{j-1})/dx^g, central (v_{j+1}-v_{j-1})/(2 dx^g); periodic
// wrap; gamma = 1 gives the plain first-order quotients.
inline GridFunction diff(const GridFunction& gf, DiffKind kind, double gamma = 1.0) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw InvalidArgument("diff: gamma must lie in (0, 1]");
  }
  const std::size_t n = gf.grid.num_cells;
  GridFunction out = make_grid_function(gf.grid);
  const double denom = std::pow(gf.grid.dx, gamma);
  const std::vector<double>& v = gf.values;
  switch (kind) {
    case DiffKind::forward:
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jp = (j + 1 == n) ? 0 : j + 1;
        out.values[j] = (v[jp] - v[j]) / denom;
      }
      break;
    case DiffKind::backward:
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jm = (j == 0) ? n - 1 : j - 1;
        out.values[j] = (v[j] - v[jm]) / denom;
      }
      break;
    case DiffKind::central:
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jp = (j + 1 == n) ? 0 : j + 1;
        const std::size_t jm = (j == 0) ? n - 1 : j - 1;
        out.values[j] = (v[jp] - v[jm]) / (2.0 * denom);
      }
      break;
  }
  return out;
}

// Standard second difference (v_{j+1} - 2 v_j + v_{j-1}) / dx^2, built as
// forward-of-backward so solvers and diagnostics share one code path.
inline GridFunction second_diff(const GridFunction& gf) {
  return diff(diff(gf, DiffKind::backward, 1.0), DiffKind::forward, 1.0);
}

// ------------------------------------------------------------------ norms ---

enum class Norm { l1 = 1, l2 = 2, linf = 3 };

namespace detail {
inline double finite_p_norm(const GridFunction& gf, const GridFunction* weight, int p) {
  const std::size_t n = gf.grid.num_cells;
  std::vector<double> terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = std::abs(gf.values[j]);
    double t = (p == 1) ? a : a * a;
    if (weight != nullptr) t /= weight->values[j];
    terms[j] = t;
  }
  const double s = gf.grid.dx * pairwise_sum(terms);
  return (p == 1) ? s : std::sqrt(s);
}
}  // namespace detail

// Weighted discrete norm: p finite -> (dx * sum_j |v_j|^p / weight_j)^(1/p);
// p = inf -> max_j |v_j| (weight ignored).
inline double weighted_lp_norm(const GridFunction& gf, const GridFunction& weight, Norm p) {
  if (!same_grid(gf.grid, weight.grid)) {
    throw InvalidArgument("weighted_lp_norm: function and weight live on different grids");
  }
  for (std::size_t j = 0; j < weight.values.size(); ++j) {
    if (!(weight.values[j] > 0.0)) {
      throw InvalidArgument("weighted_lp_norm: weight must be strictly positive (cell " +
                            std::to_string(j) + ")");
    }
  }
  if (p == Norm::linf) {
    double m = 0.0;
    for (double v : gf.values) m = std::max(m, std::abs(v));
    return m;
  }
  return detail::finite_p_norm(gf, &weight, static_cast<int>(p));
}

inline double weighted_lp_norm(const GridFunction& gf, Norm p) {
  if (p == Norm::linf) {
    double m = 0.0;
    for (double v : gf.values) m = std::max(m, std::abs(v));
    return m;
  }
  return detail::finite_p_norm(gf, nullptr, static_cast<int>(p));
}

// -------------------------------------------------- moduli of continuity ---

struct ModulusValue {
  double value{0.0};
  // Set when sigma < dx leaves no admissible shift, so the value 0 is
  // vacuous rather than informative.
  bool no_admissible_shift{false};
};

// L^p modulus of continuity in space: sup over integer shifts k with
// |k| dx <= sigma of (dx sum_j |v_{j+k} - v_j|^p)^(1/p).  Positive and
// negative shifts of equal magnitude produce the same sum over a periodic
// grid, so only k > 0 is scanned.
inline ModulusValue space_modulus(const GridFunction& gf, double sigma, int p) {
  if (p != 1 && p != 2) throw InvalidArgument("space_modulus: p must be 1 or 2");
  const Grid& g = gf.grid;
  if (!(sigma > 0.0) || sigma > 0.5 * g.domain_length) {
    throw InvalidArgument("space_modulus: sigma must lie in (0, domain_length/2]");
  }
  // Relative slack so that sigma intended as an exact multiple of dx is not
  // excluded by one rounding ulp.
  const auto kmax = static_cast<std::size_t>(sigma / g.dx * (1.0 + 1e-12));
  if (kmax == 0) return ModulusValue{0.0, true};
  const std::size_t n = g.num_cells;
  std::vector<double> terms(n);
  double sup = 0.0;
  for (std::size_t k = 1; k <= kmax; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t jk = (j + k) % n;
      const double d = std::abs(gf.values[jk] - gf.values[j]);
      terms[j] = (p == 1) ? d : d * d;
    }
    const double s = g.dx * pairwise_sum(terms);
    sup = std::max(sup, (p == 1) ? s : std::sqrt(s));
  }
  return ModulusValue{sup, false};
}

// L^p modulus of continuity in time: sup over snapshot pairs with
// |t_i - t_j| <= sigma of the spatial L^p norm of their difference.
inline double time_modulus(const std::vector<GridFunction>& snapshots,
                           const std::vector<double>& times, double sigma, int p) {
  if (p != 1 && p != 2) throw InvalidArgument("time_modulus: p must be 1 or 2");
  if (snapshots.size() < 2) {
    throw InvalidArgument("time_modulus: need at least 2 snapshots");
  }
  if (snapshots.size() != times.size()) {
    throw InvalidArgument("time_modulus: snapshot/timestamp count mismatch");
  }
  for (std::size_t i = 1; i < snapshots.size(); ++i) {
    if (!same_grid(snapshots[i].grid, snapshots[0].grid)) {
      throw InvalidArgument("time_modulus: snapshots must share one grid");
    }
    if (!(times[i] > times[i - 1])) {
      throw InvalidArgument("time_modulus: timestamps must be strictly increasing");
    }
  }
  const std::size_t m = snapshots.size();
  GridFunction d = make_grid_function(snapshots[0].grid);
  double sup = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (times[j] - times[i] > sigma * (1.0 + 1e-12)) break;
      for (std::size_t c = 0; c < d.values.size(); ++c) {
        d.values[c] = snapshots[j].values[c] - snapshots[i].values[c];
      }
      sup = std::max(sup, weighted_lp_norm(d, p == 1 ? Norm::l1 : Norm::l2));
    }
  }
  return sup;
}

// Discrete Hölder seminorm: max over cell pairs of |v_j - v_k| divided by
// the periodic center distance raised to `exponent`.  Brute-force O(N^2)
// pair scan; intended as a diagnostic on study-sized grids.
inline double holder_seminorm(const GridFunction& gf, double exponent) {
  if (!(exponent > 0.0 && exponent <= 1.0)) {
    throw InvalidArgument("holder_seminorm: exponent must lie in (0, 1]");
  }
  const Grid& g = gf.grid;
  const std::size_t n = g.num_cells;
  double sup = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      const double raw = g.center(k) - g.center(j);
      const double dist = std::min(raw, g.domain_length - raw);
      sup = std::max(sup, std::abs(gf.values[k] - gf.values[j]) / std::pow(dist, exponent));
    }
  }
  return sup;
}

// -------------------------------------------------------------- CSV I/O ---

namespace detail {
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

// Writes columns as CSV with 17 significant digits (lossless round-trip for
// IEEE doubles).  All columns must share one length.
inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<const std::vector<double>*>& columns) {
  if (columns.empty()) throw InvalidArgument("write_csv: no columns");
  const std::size_t rows = columns.front()->size();
  for (const auto* c : columns) {
    if (c->size() != rows) throw InvalidArgument("write_csv: column length mismatch");
  }
  std::ofstream out(path);
  if (!out) throw NumericError("write_csv: cannot open " + path);
  out << header << "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c > 0) out << ",";
      out << detail::format_double((*columns[c])[r]);
    }
    out << "\n";
  }
  if (!out) throw NumericError("write_csv: write failed for " + path);
}

// GridFunction serialization: header "x,value", one row per cell center.
inline void write_grid_function_csv(const std::string& path, const GridFunction& gf,
                                    const std::string& header = "x,value") {
  std::vector<double> xs(gf.grid.num_cells);
  for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = gf.grid.center(j);
  write_csv(path, header, {&xs, &gf.values});
}

struct CsvData {
  std::string header;
  std::vector<std::vector<double>> columns;
};

inline CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_csv: cannot open " + path);
  CsvData data;
  std::string line;
  if (!std::getline(in, data.header)) throw ConfigError("read_csv: empty file " + path);
  const std::size_t ncols = 1 + static_cast<std::size_t>(
      std::count(data.header.begin(), data.header.end(), ','));
  data.columns.resize(ncols);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < ncols; ++c) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(pos, comma == std::string::npos
                                                     ? std::string::npos
                                                     : comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw ConfigError("read_csv: bad number at " + path + ":" + std::to_string(lineno));
      }
      data.columns[c].push_back(v);
      if (comma == std::string::npos) {
        if (c + 1 != ncols) {
          throw ConfigError("read_csv: short row at " + path + ":" + std::to_string(lineno));
        }
        break;
      }
      pos = comma + 1;
    }
  }
  return data;
}

}  // namespace roughwave
