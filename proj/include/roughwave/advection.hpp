#ifndef ROUGHWAVE_ADVECTION_HPP
#define ROUGHWAVE_ADVECTION_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roughwave/coefficients.hpp"
#include "roughwave/grid_ops.hpp"

// Upwind finite-difference solver for the periodic linear advection problem
//
//     d/dt (w / a) + d/dx w = 0   on a periodic interval,
//
// with a strictly positive, possibly extremely rough coefficient a(x).  One
// explicit step reads
//
//     w_j^{n+1} = w_j^n + s_j (w_{j-1}^n - w_j^n),   s_j = (dt/dx) a_j,
//
// which is a convex combination of two neighbouring values whenever every
// s_j <= 1 (the stability condition).  The module also provides u <-> w
// conversion (u = w/a), entropy / conservation diagnostics, the k-step
// propagation operator in banded form, and a method-of-characteristics
// reference solver for smooth coefficients.

namespace roughwave {

// ------------------------------------------------------------------ state ---

struct AdvectionState {
  GridFunction w;
  std::shared_ptr<const Coefficient> coefficient;
  double time = 0.0;
  double dt = 0.0;
  double lambda = 0.0;  // dt / dx
};

// Stability-limited time step: dt = theta_fraction * dx / max(a), so that
// lambda * max(a) = theta_fraction <= 1.
inline double cfl_dt(const Coefficient& coefficient, double dx,
                     double theta_fraction) {
  if (!(dx > 0.0) || !std::isfinite(dx)) {
    throw InvalidArgument("cfl_dt: dx must be positive and finite");
  }
  if (!(theta_fraction > 0.0) || !(theta_fraction <= 1.0)) {
    throw InvalidArgument("cfl_dt: theta_fraction must lie in (0, 1]");
  }
  return theta_fraction * dx / coefficient.upper_bound;
}

namespace detail {

inline void check_advection_structure(const AdvectionState& state,
                                      const char* who) {
  if (!state.coefficient) {
    throw InvalidArgument(std::string(who) + ": state has no coefficient");
  }
  if (!same_grid(state.coefficient->values.grid, state.w.grid)) {
    throw InvalidArgument(std::string(who) +
                          ": coefficient grid does not match the state grid");
  }
  if (!(state.dt > 0.0) || !std::isfinite(state.dt)) {
    throw InvalidArgument(std::string(who) + ": dt must be positive and finite");
  }
  if (state.lambda != state.dt / state.w.grid.dx) {
    throw InvalidArgument(std::string(who) + ": lambda is not dt / dx");
  }
}

inline void check_advection_stability(const AdvectionState& state,
                                      const char* who) {
  const double reach = state.lambda * state.coefficient->upper_bound;
  if (!(reach <= 1.0 + stability_check_slack)) {
    throw StabilityViolation(std::string(who) +
                             ": time step violates the stability bound, "
                             "lambda * max(a) = " +
                             format_double(reach) + " > 1");
  }
}

}  // namespace detail

// Validating constructor for AdvectionState.  Throws InvalidArgument for
// structural problems and StabilityViolation when lambda * max(a) > 1
// (up to `stability_check_slack` relative headroom for rounded quotients).
inline AdvectionState make_advection_state(
    GridFunction w, std::shared_ptr<const Coefficient> coefficient,
    double time, double dt) {
  AdvectionState state{std::move(w), std::move(coefficient), time, dt, 0.0};
  state.lambda = state.dt / state.w.grid.dx;
  detail::check_advection_structure(state, "make_advection_state");
  if (!(time >= 0.0) || !std::isfinite(time)) {
    throw InvalidArgument("make_advection_state: time must be nonnegative");
  }
  for (std::size_t j = 0; j < state.w.values.size(); ++j) {
    if (!std::isfinite(state.w.values[j])) {
      throw InvalidArgument(
          "make_advection_state: non-finite value in cell " +
          std::to_string(j));
    }
  }
  detail::check_advection_stability(state, "make_advection_state");
  return state;
}

inline AdvectionState make_advection_state(GridFunction w,
                                           Coefficient coefficient,
                                           double time, double dt) {
  return make_advection_state(
      std::move(w),
      std::make_shared<const Coefficient>(std::move(coefficient)), time, dt);
}

// ------------------------------------------------------------------- step ---

// One upwind step.  Refuses to step when the stability bound is violated.
// Each new value is a convex combination of w_j and w_{j-1}; the result is
// clamped into [min, max] of those two sources so the maximum principle
// survives floating-point rounding exactly, and the boundary weights s = 0
// and s = 1 reproduce the source values bit-for-bit.
inline AdvectionState upwind_step(const AdvectionState& state) {
  detail::check_advection_structure(state, "upwind_step");
  detail::check_advection_stability(state, "upwind_step");

  const std::vector<double>& a = state.coefficient->values.values;
  const std::vector<double>& w = state.w.values;
  const std::size_t n = w.size();

  AdvectionState next;
  next.w = make_grid_function(state.w.grid);
  next.coefficient = state.coefficient;
  next.time = state.time + state.dt;
  next.dt = state.dt;
  next.lambda = state.lambda;

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jm1 = (j == 0) ? n - 1 : j - 1;
    const double s = std::min(state.lambda * a[j], 1.0);
    double value;
    if (s == 1.0) {
      value = w[jm1];
    } else if (s == 0.0) {
      value = w[j];
    } else {
      value = w[j] + s * (w[jm1] - w[j]);
      value = std::clamp(value, std::min(w[j], w[jm1]),
                         std::max(w[j], w[jm1]));
    }
    next.w.values[j] = value;
  }
  return next;
}

// ------------------------------------------------------------ diagnostics ---

// Signed conserved quantity dx * sum_j w_j / a_j.  Along a periodic solve the
// per-step update telescopes, so this sum is invariant up to accumulated
// rounding (about 1e-12 relative in practice).
inline double conservation_sum(const AdvectionState& state) {
  if (!state.coefficient ||
      !same_grid(state.coefficient->values.grid, state.w.grid)) {
    throw InvalidArgument("conservation_sum: malformed state");
  }
  const std::size_t n = state.w.values.size();
  std::vector<double> terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    terms[j] = state.w.values[j] / state.coefficient->values.values[j];
  }
  return state.w.grid.dx * pairwise_sum(terms);
}

// u = w / a and back.
inline GridFunction to_u(const GridFunction& w, const Coefficient& coefficient) {
  if (!same_grid(coefficient.values.grid, w.grid)) {
    throw InvalidArgument("to_u: coefficient grid does not match");
  }
  GridFunction u = w;
  for (std::size_t j = 0; j < u.values.size(); ++j) {
    u.values[j] /= coefficient.values.values[j];
  }
  return u;
}

inline GridFunction from_u(const GridFunction& u,
                           const Coefficient& coefficient) {
  if (!same_grid(coefficient.values.grid, u.grid)) {
    throw InvalidArgument("from_u: coefficient grid does not match");
  }
  GridFunction w = u;
  for (std::size_t j = 0; j < w.values.size(); ++j) {
    w.values[j] *= coefficient.values.values[j];
  }
  return w;
}

namespace detail {

// Two states are consecutive when they share the coefficient (same object or
// identical values on the same grid) and the second one's clock equals the
// first one's clock advanced by its step.
inline void check_consecutive(const AdvectionState& before,
                              const AdvectionState& after, const char* who) {
  check_advection_structure(before, who);
  check_advection_structure(after, who);
  if (!same_grid(before.w.grid, after.w.grid)) {
    throw InvalidArgument(std::string(who) +
                          ": states live on different grids");
  }
  if (before.coefficient != after.coefficient &&
      before.coefficient->values.values != after.coefficient->values.values) {
    throw InvalidArgument(std::string(who) +
                          ": states use different coefficients");
  }
  const double expected = before.time + before.dt;
  if (!(std::fabs(after.time - expected) <=
        1e-12 * std::max(1.0, std::fabs(expected)))) {
    throw InvalidArgument(std::string(who) +
                          ": states are not consecutive in time");
  }
}

}  // namespace detail

// Per-cell entropy residual for the entropy |w - k|^p, p in {1, 2}:
//
//   R_j = (|w1_j - k|^p - |w0_j - k|^p) / a_j
//         + (dt/dx) (|w0_j - k|^p - |w0_{j-1} - k|^p).
//
// For consecutive states of a stable solve, max_j R_j <= 0 up to rounding;
// checks should allow 1e-12 * (1 + |k| + max|w|)^p.
inline GridFunction entropy_residual(const AdvectionState& before,
                                     const AdvectionState& after, double k,
                                     int p) {
  if (p != 1 && p != 2) {
    throw InvalidArgument("entropy_residual: p must be 1 or 2");
  }
  detail::check_consecutive(before, after, "entropy_residual");

  const std::vector<double>& a = before.coefficient->values.values;
  const std::vector<double>& w0 = before.w.values;
  const std::vector<double>& w1 = after.w.values;
  const std::size_t n = w0.size();

  const auto entropy = [k, p](double w) {
    const double d = std::fabs(w - k);
    return (p == 1) ? d : d * d;
  };

  GridFunction residual = make_grid_function(before.w.grid);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jm1 = (j == 0) ? n - 1 : j - 1;
    residual.values[j] = (entropy(w1[j]) - entropy(w0[j])) / a[j] +
                         before.lambda * (entropy(w0[j]) - entropy(w0[jm1]));
  }
  return residual;
}

// ----------------------------------------------------------------- solver ---

struct AdvectionSnapshot {
  double requested_time = 0.0;
  // First computed state whose clock reached requested_time.
  AdvectionState state;
  // State one step earlier (carrying the dt actually used); absent only when
  // the snapshot is the initial state.
  std::optional<AdvectionState> predecessor;
};

struct AdvectionTrajectory {
  AdvectionState initial_state;
  AdvectionState final_state;
  std::optional<AdvectionState> final_predecessor;  // absent when T = 0
  std::vector<AdvectionSnapshot> snapshots;         // ascending requested time
  std::size_t num_steps = 0;
  double base_dt = 0.0;   // stability-limited step used for all full steps
  double final_dt = 0.0;  // last step, shortened to land exactly on final_time
  std::vector<double> max_abs_series;       // max_j |w_j| after 0..num_steps steps
  std::vector<double> conservation_series;  // conservation_sum after 0..num_steps steps
};

// Runs repeated upwind steps from w0 to final_time.  All steps use the
// stability-limited dt except the last, which is shortened so the final state
// lands exactly on final_time (a shorter step only strengthens stability).
// Snapshots record, for each requested time, the first state at or past it
// together with its predecessor so step-level diagnostics can be re-run later.
inline AdvectionTrajectory solve_advection(
    const GridFunction& w0, const Coefficient& coefficient, double final_time,
    double theta_fraction, const std::vector<double>& snapshot_times = {}) {
  if (!(final_time >= 0.0) || !std::isfinite(final_time)) {
    throw InvalidArgument(
        "solve_advection: final_time must be nonnegative and finite");
  }
  for (double t : snapshot_times) {
    if (!std::isfinite(t) || t < 0.0 || t > final_time) {
      throw InvalidArgument("solve_advection: snapshot time " +
                            detail::format_double(t) +
                            " outside [0, final_time]");
    }
  }

  const double dx = w0.grid.dx;
  const double base_dt = cfl_dt(coefficient, dx, theta_fraction);
  auto shared = std::make_shared<const Coefficient>(coefficient);

  AdvectionTrajectory out;
  out.base_dt = base_dt;
  out.final_dt = base_dt;
  out.initial_state = make_advection_state(w0, shared, 0.0, base_dt);

  std::vector<double> wanted = snapshot_times;
  std::sort(wanted.begin(), wanted.end());
  std::size_t next_wanted = 0;
  const auto capture = [&](const AdvectionState& state,
                           const std::optional<AdvectionState>& predecessor) {
    while (next_wanted < wanted.size() && state.time >= wanted[next_wanted]) {
      out.snapshots.push_back({wanted[next_wanted], state, predecessor});
      ++next_wanted;
    }
  };

  const auto record = [&](const AdvectionState& state) {
    double max_abs = 0.0;
    for (double value : state.w.values) {
      max_abs = std::max(max_abs, std::fabs(value));
    }
    out.max_abs_series.push_back(max_abs);
    out.conservation_series.push_back(conservation_sum(state));
  };

  AdvectionState state = out.initial_state;
  record(state);
  capture(state, std::nullopt);

  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(final_time / base_dt)) + 4;
  std::optional<AdvectionState> previous;
  while (state.time < final_time) {
    if (out.num_steps >= max_steps) {
      throw NumericError("solve_advection: failed to land on final_time");
    }
    AdvectionState before = state;
    before.dt = std::min(base_dt, final_time - state.time);
    before.lambda = before.dt / dx;
    state = upwind_step(before);
    previous = std::move(before);
    ++out.num_steps;
    out.final_dt = previous->dt;
    record(state);
    capture(state, previous);
  }
  if (!(std::fabs(state.time - final_time) <=
        1e-9 * std::max(1.0, final_time))) {
    throw NumericError("solve_advection: time stepping missed final_time");
  }

  out.final_state = std::move(state);
  out.final_predecessor = std::move(previous);
  return out;
}

// --------------------------------------------------- propagation operator ---

// Banded representation of the k-step upwind update: row j holds the weights
// with which the initial cell values enter cell j after k steps.  Entry m of
// row j is the total weight of initial cell (j - m) mod N; once k >= N the
// band saturates at width N and weights for offsets that differ by N fold
// onto the same entry.
struct PropagationOperator {
  std::size_t steps = 0;
  double lambda = 0.0;
  std::size_t num_cells = 0;
  std::vector<std::vector<double>> rows;

  double weight(std::size_t j, std::size_t initial_cell) const {
    if (j >= num_cells || initial_cell >= num_cells) {
      throw InvalidArgument("PropagationOperator::weight: cell out of range");
    }
    const std::size_t m = (j + num_cells - initial_cell) % num_cells;
    return (m < rows[j].size()) ? rows[j][m] : 0.0;
  }

  double row_sum(std::size_t j) const {
    if (j >= num_cells) {
      throw InvalidArgument("PropagationOperator::row_sum: row out of range");
    }
    return pairwise_sum(rows[j]);
  }

  std::vector<double> apply(const std::vector<double>& initial) const {
    if (initial.size() != num_cells) {
      throw InvalidArgument(
          "PropagationOperator::apply: vector length does not match");
    }
    std::vector<double> result(num_cells);
    std::vector<double> terms;
    for (std::size_t j = 0; j < num_cells; ++j) {
      terms.resize(rows[j].size());
      for (std::size_t m = 0; m < rows[j].size(); ++m) {
        terms[m] = rows[j][m] * initial[(j + num_cells - m) % num_cells];
      }
      result[j] = pairwise_sum(terms);
    }
    return result;
  }
};

// Builds the k-step propagation operator by applying the one-step update to
// the banded identity, which is exactly the result of driving every unit
// basis vector through k upwind steps.  Rows stay nonnegative and sum to 1
// up to rounding because every step is a convex combination.
inline PropagationOperator propagation_operator(const Coefficient& coefficient,
                                                double lambda,
                                                std::size_t steps) {
  const std::size_t n = coefficient.values.values.size();
  if (n == 0) {
    throw InvalidArgument("propagation_operator: empty coefficient");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument(
        "propagation_operator: lambda must be nonnegative and finite");
  }
  if (!(lambda * coefficient.upper_bound <= 1.0 + stability_check_slack)) {
    throw StabilityViolation(
        "propagation_operator: lambda * max(a) = " +
        detail::format_double(lambda * coefficient.upper_bound) + " > 1");
  }

  std::vector<double> s(n);
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) {
    s[j] = std::min(lambda * coefficient.values.values[j], 1.0);
    v[j] = 1.0 - s[j];
  }

  std::vector<std::vector<double>> rows(n, std::vector<double>{1.0});
  for (std::size_t step = 1; step <= steps; ++step) {
    const std::size_t old_width = rows[0].size();
    const std::size_t new_width = std::min(step, n - 1) + 1;
    const bool old_saturated = (old_width == n);
    std::vector<std::vector<double>> next(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t jm1 = (j == 0) ? n - 1 : j - 1;
      std::vector<double> row(new_width, 0.0);
      for (std::size_t m = 0; m < new_width; ++m) {
        const double from_same = (m < old_width) ? rows[j][m] : 0.0;
        double from_left = 0.0;
        if (m > 0) {
          from_left = (m - 1 < old_width) ? rows[jm1][m - 1] : 0.0;
        } else if (old_saturated) {
          from_left = rows[jm1][n - 1];
        }
        row[m] = v[j] * from_same + s[j] * from_left;
      }
      next[j] = std::move(row);
    }
    rows = std::move(next);
  }
  return {steps, lambda, n, std::move(rows)};
}

// -------------------------------------------------------- characteristics ---

// Reference solver for smooth coefficients: the solution is constant along
// characteristics, so for each query point x the backward characteristic
// xi' = -a(xi), xi(0) = x is traced over [0, t] with the classical 4-stage
// one-step method (substep t / ceil(t / 1e-4)), and w0 at the foot is
// returned.  Throws InvalidArgument when t is invalid or the coefficient is
// not strictly positive along the path.
template <std::invocable<double> F, std::invocable<double> A>
std::vector<double> characteristics_solve(F&& w0, A&& smooth_coefficient,
                                          double t,
                                          const std::vector<double>& query_points) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw InvalidArgument(
        "characteristics_solve: time must be nonnegative and finite");
  }
  const auto speed = [&](double x) {
    const double a = smooth_coefficient(x);
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument(
          "characteristics_solve: coefficient must be strictly positive "
          "along the characteristic");
    }
    return a;
  };

  constexpr double base_substep = 1e-4;
  std::vector<double> values;
  values.reserve(query_points.size());
  for (double x : query_points) {
    double xi = x;
    if (t > 0.0) {
      const std::size_t substeps =
          static_cast<std::size_t>(std::ceil(t / base_substep));
      const double h = t / static_cast<double>(substeps);
      for (std::size_t i = 0; i < substeps; ++i) {
        const double k1 = -speed(xi);
        const double k2 = -speed(xi + 0.5 * h * k1);
        const double k3 = -speed(xi + 0.5 * h * k2);
        const double k4 = -speed(xi + h * k3);
        xi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    values.push_back(w0(xi));
  }
  return values;
}

}  // namespace roughwave

#endif  // ROUGHWAVE_ADVECTION_HPP
