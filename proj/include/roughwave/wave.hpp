#ifndef ROUGHWAVE_WAVE_HPP
#define ROUGHWAVE_WAVE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roughwave/coefficients.hpp"
#include "roughwave/grid_ops.hpp"

// Finite-difference solver for the periodic first-order wave system
//
//     u_t = v_x,   v_t / a = u_x,
//
// with a strictly positive, possibly very rough coefficient a(x).  The
// scheme is an explicit diffusive-centered update on collocated values:
//
//     u^{n+1} = u + dt [ Dc v + (dx/2) D+D- u ],
//     v^{n+1} = v + a dt [ Dc u + (dx/2) D+D- v ],
//
// stable under 2 dt max_j max(2 a_j + 1, a_j/4 + 5/4) <= dx.  The module
// also provides energy/entropy diagnostics, a quotient identity check,
// fractional difference-quotient bounds, and pressure reconstruction
// (p^{n+1} = p^n + dt v^n).

namespace roughwave {

// ------------------------------------------------------------------ state ---

struct WaveState {
  GridFunction u;
  GridFunction v;
  std::shared_ptr<const Coefficient> coefficient;
  double time = 0.0;
  double dt = 0.0;
};

struct EnergyRecord {
  double total_energy = 0.0;
  double flux_divergence_check = 0.0;
  double k = 0.0;
  double ell = 0.0;
};

// Largest stable wave speed scale for the scheme.
inline double wave_speed_scale(const Coefficient& coefficient) {
  const double a = coefficient.upper_bound;
  return std::max(2.0 * a + 1.0, a / 4.0 + 1.25);
}

// Stability-limited step: dt = safety * dx / (2 max_j max(2a_j+1, a_j/4+5/4)).
inline double cfl_dt_wave(const Coefficient& coefficient, double dx,
                          double safety) {
  if (!(dx > 0.0) || !std::isfinite(dx)) {
    throw InvalidArgument("cfl_dt_wave: dx must be positive and finite");
  }
  if (!(safety > 0.0) || !(safety <= 1.0)) {
    throw InvalidArgument("cfl_dt_wave: safety must lie in (0, 1]");
  }
  return safety * dx / (2.0 * wave_speed_scale(coefficient));
}

namespace detail {

inline void check_wave_structure(const WaveState& state, const char* who) {
  if (!state.coefficient) {
    throw InvalidArgument(std::string(who) + ": state has no coefficient");
  }
  if (!same_grid(state.u.grid, state.v.grid) ||
      !same_grid(state.coefficient->values.grid, state.u.grid)) {
    throw InvalidArgument(std::string(who) +
                          ": u, v and the coefficient must share one grid");
  }
  if (!(state.dt > 0.0) || !std::isfinite(state.dt)) {
    throw InvalidArgument(std::string(who) + ": dt must be positive and finite");
  }
}

inline void check_wave_stability(const WaveState& state, const char* who) {
  const double reach =
      2.0 * state.dt * wave_speed_scale(*state.coefficient);
  if (!(reach <= state.u.grid.dx * (1.0 + stability_check_slack))) {
    throw StabilityViolation(
        std::string(who) +
        ": time step violates the stability bound, 2 dt max(2a+1, a/4+5/4) "
        "= " +
        format_double(reach) + " > dx = " + format_double(state.u.grid.dx));
  }
}

inline void check_wave_consecutive(const WaveState& before,
                                   const WaveState& after, const char* who) {
  check_wave_structure(before, who);
  check_wave_structure(after, who);
  if (!same_grid(before.u.grid, after.u.grid)) {
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

// Validating constructor for WaveState.
inline WaveState make_wave_state(GridFunction u, GridFunction v,
                                 std::shared_ptr<const Coefficient> coefficient,
                                 double time, double dt) {
  WaveState state{std::move(u), std::move(v), std::move(coefficient), time,
                  dt};
  detail::check_wave_structure(state, "make_wave_state");
  if (!(time >= 0.0) || !std::isfinite(time)) {
    throw InvalidArgument("make_wave_state: time must be nonnegative");
  }
  for (std::size_t j = 0; j < state.u.values.size(); ++j) {
    if (!std::isfinite(state.u.values[j]) || !std::isfinite(state.v.values[j])) {
      throw InvalidArgument("make_wave_state: non-finite value in cell " +
                            std::to_string(j));
    }
  }
  detail::check_wave_stability(state, "make_wave_state");
  return state;
}

inline WaveState make_wave_state(GridFunction u, GridFunction v,
                                 Coefficient coefficient, double time,
                                 double dt) {
  return make_wave_state(
      std::move(u), std::move(v),
      std::make_shared<const Coefficient>(std::move(coefficient)), time, dt);
}

// ------------------------------------------------------------------- step ---

// One explicit step of the diffusive-centered scheme.  The difference
// quotients go through `diff`, so the stepping arithmetic and the entropy
// diagnostics below share one code path.
inline WaveState wave_step(const WaveState& state) {
  detail::check_wave_structure(state, "wave_step");
  detail::check_wave_stability(state, "wave_step");

  const GridFunction dcu = diff(state.u, DiffKind::central);
  const GridFunction dcv = diff(state.v, DiffKind::central);
  const GridFunction ddu = second_diff(state.u);
  const GridFunction ddv = second_diff(state.v);
  const std::vector<double>& a = state.coefficient->values.values;
  const double half_dx = 0.5 * state.u.grid.dx;
  const double dt = state.dt;

  WaveState next;
  next.u = make_grid_function(state.u.grid);
  next.v = make_grid_function(state.v.grid);
  next.coefficient = state.coefficient;
  next.time = state.time + state.dt;
  next.dt = state.dt;
  for (std::size_t j = 0; j < next.u.values.size(); ++j) {
    next.u.values[j] =
        state.u.values[j] + dt * (dcv.values[j] + half_dx * ddu.values[j]);
    next.v.values[j] =
        state.v.values[j] +
        a[j] * dt * (dcu.values[j] + half_dx * ddv.values[j]);
  }
  return next;
}

// ------------------------------------------------------------ diagnostics ---

// Discrete energy against the reference levels (k, ell):
//   eta_j = |u_j - k|^2 / 2 + |v_j - ell|^2 / (2 a_j),
//   q_j   = -(u_j - k)(v_j - ell).
// total_energy = dx sum eta_j; flux_divergence_check = dx sum Dc q_j, which
// telescopes to zero over a periodic grid.
inline EnergyRecord energy(const WaveState& state, double k, double ell) {
  detail::check_wave_structure(state, "energy");
  const std::size_t n = state.u.values.size();
  const std::vector<double>& a = state.coefficient->values.values;

  std::vector<double> eta(n);
  GridFunction q = make_grid_function(state.u.grid);
  for (std::size_t j = 0; j < n; ++j) {
    const double du = state.u.values[j] - k;
    const double dv = state.v.values[j] - ell;
    eta[j] = 0.5 * du * du + dv * dv / (2.0 * a[j]);
    q.values[j] = -du * dv;
  }
  EnergyRecord record;
  record.total_energy = state.u.grid.dx * pairwise_sum(eta);
  record.flux_divergence_check =
      state.u.grid.dx * pairwise_sum(diff(q, DiffKind::central).values);
  record.k = k;
  record.ell = ell;
  return record;
}

// Per-cell entropy residual for consecutive states: with all spatial
// quotients taken at the earlier state,
//
//   R_j = (eta^{after} - eta^{before})_j / dt + (Dc q)_j
//         - (dx (dt - dx) / 2) D-[ D+(u-k) D+(v-ell) ]_j
//         - (dx / 4) D+D-[ (u-k)^2 + (v-ell)^2 ]_j,
//
// which is <= 0 up to rounding for stable steps; checks should allow
// 1e-12 * (1 + |k| + |ell| + max|u| + max|v|)^2 * (1 + 1/min(a)).
inline GridFunction wave_entropy_residual(const WaveState& before,
                                          const WaveState& after, double k,
                                          double ell) {
  detail::check_wave_consecutive(before, after, "wave_entropy_residual");

  const std::size_t n = before.u.values.size();
  const std::vector<double>& a = before.coefficient->values.values;
  const double dx = before.u.grid.dx;
  const double dt = before.dt;

  GridFunction pu = make_grid_function(before.u.grid);
  GridFunction pv = make_grid_function(before.u.grid);
  GridFunction q = make_grid_function(before.u.grid);
  GridFunction squares = make_grid_function(before.u.grid);
  std::vector<double> eta0(n), eta1(n);
  for (std::size_t j = 0; j < n; ++j) {
    pu.values[j] = before.u.values[j] - k;
    pv.values[j] = before.v.values[j] - ell;
    q.values[j] = -pu.values[j] * pv.values[j];
    squares.values[j] =
        pu.values[j] * pu.values[j] + pv.values[j] * pv.values[j];
    eta0[j] = 0.5 * pu.values[j] * pu.values[j] +
              pv.values[j] * pv.values[j] / (2.0 * a[j]);
    const double du1 = after.u.values[j] - k;
    const double dv1 = after.v.values[j] - ell;
    eta1[j] = 0.5 * du1 * du1 + dv1 * dv1 / (2.0 * a[j]);
  }

  const GridFunction dcq = diff(q, DiffKind::central);
  const GridFunction dpu = diff(pu, DiffKind::forward);
  const GridFunction dpv = diff(pv, DiffKind::forward);
  GridFunction cross = make_grid_function(before.u.grid);
  for (std::size_t j = 0; j < n; ++j) {
    cross.values[j] = dpu.values[j] * dpv.values[j];
  }
  const GridFunction cross_div = diff(cross, DiffKind::backward);
  const GridFunction squares_dd = second_diff(squares);

  const double cross_weight = dx * (dt - dx) / 2.0;
  GridFunction residual = make_grid_function(before.u.grid);
  for (std::size_t j = 0; j < n; ++j) {
    residual.values[j] = (eta1[j] - eta0[j]) / dt + dcq.values[j] -
                         cross_weight * cross_div.values[j] -
                         (dx / 4.0) * squares_dd.values[j];
  }
  return residual;
}

// Quotient identity relating the step increments to the spatial quotients of
// the earlier state:
//   sum_j |Dt+ u|^2 + a_j^-2 |Dt+ v|^2
//     = sum_j |Dc u|^2 + |Dc v|^2 + (dx^2/4)(|D+D- u|^2 + |D+D- v|^2).
// Returns (lhs, rhs); they agree to rounding for any consecutive pair.
inline std::pair<double, double> qer_identity_check(const WaveState& before,
                                                    const WaveState& after) {
  detail::check_wave_consecutive(before, after, "qer_identity_check");
  const std::size_t n = before.u.values.size();
  const std::vector<double>& a = before.coefficient->values.values;
  const double dt = before.dt;

  std::vector<double> lhs_terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double du = (after.u.values[j] - before.u.values[j]) / dt;
    const double dv = (after.v.values[j] - before.v.values[j]) / dt;
    lhs_terms[j] = du * du + dv * dv / (a[j] * a[j]);
  }

  const GridFunction dcu = diff(before.u, DiffKind::central);
  const GridFunction dcv = diff(before.v, DiffKind::central);
  const GridFunction ddu = second_diff(before.u);
  const GridFunction ddv = second_diff(before.v);
  const double dx = before.u.grid.dx;
  const double quarter_dx2 = dx * dx / 4.0;
  std::vector<double> rhs_terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    rhs_terms[j] =
        dcu.values[j] * dcu.values[j] + dcv.values[j] * dcv.values[j] +
        quarter_dx2 * (ddu.values[j] * ddu.values[j] +
                       ddv.values[j] * ddv.values[j]);
  }
  return {pairwise_sum(lhs_terms), pairwise_sum(rhs_terms)};
}

// ----------------------------------------------------------------- solver ---

struct WaveSnapshot {
  double requested_time = 0.0;
  WaveState state;
  std::optional<WaveState> predecessor;
  GridFunction pressure;  // forward-Euler integral of v up to state.time
};

struct WaveTrajectory {
  WaveState initial_state;
  WaveState final_state;
  std::optional<WaveState> final_predecessor;  // absent when T = 0
  std::vector<WaveSnapshot> snapshots;
  std::size_t num_steps = 0;
  double base_dt = 0.0;
  double final_dt = 0.0;
  std::vector<double> energy_series;  // energy at levels (0, 0) after 0..num_steps steps
  std::vector<double> step_dts;       // dt of each executed step
  GridFunction final_pressure;
};

// Runs repeated wave steps from (u0, v0) to final_time, shortening the last
// step to land exactly on final_time.  The pressure p^{n+1} = p^n + dt v^n is
// integrated inline (p0 defaults to zero) and recorded with every snapshot.
inline WaveTrajectory solve_wave(const GridFunction& u0,
                                 const GridFunction& v0,
                                 const Coefficient& coefficient,
                                 double final_time, double safety = 1.0,
                                 const std::vector<double>& snapshot_times = {},
                                 const std::optional<GridFunction>& p0 = {}) {
  if (!(final_time >= 0.0) || !std::isfinite(final_time)) {
    throw InvalidArgument(
        "solve_wave: final_time must be nonnegative and finite");
  }
  for (double t : snapshot_times) {
    if (!std::isfinite(t) || t < 0.0 || t > final_time) {
      throw InvalidArgument("solve_wave: snapshot time " +
                            detail::format_double(t) +
                            " outside [0, final_time]");
    }
  }
  if (p0 && !same_grid(p0->grid, u0.grid)) {
    throw InvalidArgument("solve_wave: p0 grid does not match the data grid");
  }

  const double dx = u0.grid.dx;
  const double base_dt = cfl_dt_wave(coefficient, dx, safety);
  auto shared = std::make_shared<const Coefficient>(coefficient);

  WaveTrajectory out;
  out.base_dt = base_dt;
  out.final_dt = base_dt;
  out.initial_state = make_wave_state(u0, v0, shared, 0.0, base_dt);

  GridFunction pressure = p0 ? *p0 : make_grid_function(u0.grid);

  std::vector<double> wanted = snapshot_times;
  std::sort(wanted.begin(), wanted.end());
  std::size_t next_wanted = 0;
  const auto capture = [&](const WaveState& state,
                           const std::optional<WaveState>& predecessor) {
    while (next_wanted < wanted.size() && state.time >= wanted[next_wanted]) {
      out.snapshots.push_back(
          {wanted[next_wanted], state, predecessor, pressure});
      ++next_wanted;
    }
  };

  WaveState state = out.initial_state;
  out.energy_series.push_back(energy(state, 0.0, 0.0).total_energy);
  capture(state, std::nullopt);

  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(final_time / base_dt)) + 4;
  std::optional<WaveState> previous;
  while (state.time < final_time) {
    if (out.num_steps >= max_steps) {
      throw NumericError("solve_wave: failed to land on final_time");
    }
    WaveState before = state;
    before.dt = std::min(base_dt, final_time - state.time);
    for (std::size_t j = 0; j < pressure.values.size(); ++j) {
      pressure.values[j] += before.dt * before.v.values[j];
    }
    state = wave_step(before);
    previous = std::move(before);
    ++out.num_steps;
    out.final_dt = previous->dt;
    out.step_dts.push_back(previous->dt);
    out.energy_series.push_back(energy(state, 0.0, 0.0).total_energy);
    capture(state, previous);
  }
  if (!(std::fabs(state.time - final_time) <=
        1e-9 * std::max(1.0, final_time))) {
    throw NumericError("solve_wave: time stepping missed final_time");
  }

  out.final_state = std::move(state);
  out.final_predecessor = std::move(previous);
  out.final_pressure = std::move(pressure);
  return out;
}

// --------------------------------------------------- fractional quotients ---

struct FractionalBoundsReport {
  double gamma = 1.0;
  // dx sum |Dt+_g u|^2 + (1/a) |Dt+_g v|^2 for each step transition.
  std::vector<double> time_quantity;
  // dx sum |Dc_g u|^2 + |Dc_g v|^2 + (dx^2/4)(|D+_g D- u|^2 + |D+_g D- v|^2)
  // for each recorded state.
  std::vector<double> space_quantity;
  // |space[n] - theta^{2 gamma - 2} * (1/a^2)-weighted time form at n|: the
  // two sides are algebraically equal, so the gap is pure rounding.
  std::vector<double> identity_gap;
  double max_time_quantity = 0.0;
  double max_space_quantity = 0.0;
  double bound_value = 0.0;  // max(1, max(a)) * time_quantity[0]
  bool time_bound_holds = false;
  bool uniform_steps = false;
};

// Evaluates the fractional difference-quotient energies over a sequence of
// consecutive states.  Because the increments of the solution solve the same
// scheme, the time quantity is non-increasing while dt stays fixed; the
// reported contract flag checks max <= max(1, max(a)) * step-0 value.
inline FractionalBoundsReport fractional_bounds(
    const std::vector<WaveState>& trajectory, double gamma) {
  if (!(gamma > 0.0) || !(gamma <= 1.0)) {
    throw InvalidArgument("fractional_bounds: gamma must lie in (0, 1]");
  }
  if (trajectory.size() < 2) {
    throw InvalidArgument(
        "fractional_bounds: need at least 2 consecutive states");
  }
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    detail::check_wave_consecutive(trajectory[i - 1], trajectory[i],
                                   "fractional_bounds");
  }

  const Grid& grid = trajectory[0].u.grid;
  const double dx = grid.dx;
  const std::vector<double>& a =
      trajectory[0].coefficient->values.values;
  const std::size_t n = grid.num_cells;

  FractionalBoundsReport report;
  report.gamma = gamma;
  report.uniform_steps = true;
  for (std::size_t i = 1; i + 1 < trajectory.size(); ++i) {
    if (trajectory[i].dt != trajectory[0].dt) report.uniform_steps = false;
  }

  std::vector<double> a2_time;  // (1/a^2)-weighted variant for the identity
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    const WaveState& s0 = trajectory[i];
    const WaveState& s1 = trajectory[i + 1];
    const double dtg = std::pow(s0.dt, gamma);
    std::vector<double> terms(n);
    std::vector<double> terms_a2(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double du = (s1.u.values[j] - s0.u.values[j]) / dtg;
      const double dv = (s1.v.values[j] - s0.v.values[j]) / dtg;
      terms[j] = du * du + dv * dv / a[j];
      terms_a2[j] = du * du + dv * dv / (a[j] * a[j]);
    }
    report.time_quantity.push_back(dx * pairwise_sum(terms));
    a2_time.push_back(dx * pairwise_sum(terms_a2));
  }

  for (const WaveState& s : trajectory) {
    const GridFunction dcu = diff(s.u, DiffKind::central, gamma);
    const GridFunction dcv = diff(s.v, DiffKind::central, gamma);
    const GridFunction ddu =
        diff(diff(s.u, DiffKind::backward), DiffKind::forward, gamma);
    const GridFunction ddv =
        diff(diff(s.v, DiffKind::backward), DiffKind::forward, gamma);
    const double quarter_dx2 = dx * dx / 4.0;
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j) {
      terms[j] =
          dcu.values[j] * dcu.values[j] + dcv.values[j] * dcv.values[j] +
          quarter_dx2 * (ddu.values[j] * ddu.values[j] +
                         ddv.values[j] * ddv.values[j]);
    }
    report.space_quantity.push_back(dx * pairwise_sum(terms));
  }

  for (std::size_t i = 0; i < a2_time.size(); ++i) {
    const double theta = trajectory[i].dt / dx;
    report.identity_gap.push_back(std::fabs(
        report.space_quantity[i] -
        std::pow(theta, 2.0 * gamma - 2.0) * a2_time[i]));
  }

  report.max_time_quantity =
      *std::max_element(report.time_quantity.begin(),
                        report.time_quantity.end());
  report.max_space_quantity =
      *std::max_element(report.space_quantity.begin(),
                        report.space_quantity.end());
  report.bound_value =
      std::max(1.0, trajectory[0].coefficient->upper_bound) *
      report.time_quantity.front();
  report.time_bound_holds =
      report.max_time_quantity <=
      report.bound_value * (1.0 + stability_check_slack) + 1e-300;
  return report;
}

// ---------------------------------------------------------------- pressure --

// Forward-Euler pressure integral: given v at the start of every executed
// step and the matching dt values, returns the pressures p^0 = p0,
// p^{n+1} = p^n + dt_n v^n (one more entry than there are steps).
inline std::vector<GridFunction> reconstruct_pressure(
    const std::vector<GridFunction>& v_steps, const std::vector<double>& dts,
    const GridFunction& p0) {
  if (v_steps.size() != dts.size()) {
    throw InvalidArgument(
        "reconstruct_pressure: need one dt per recorded v step");
  }
  for (std::size_t i = 0; i < v_steps.size(); ++i) {
    if (!same_grid(v_steps[i].grid, p0.grid)) {
      throw InvalidArgument("reconstruct_pressure: step " + std::to_string(i) +
                            " does not share the pressure grid");
    }
    if (!(dts[i] > 0.0) || !std::isfinite(dts[i])) {
      throw InvalidArgument("reconstruct_pressure: bad dt at step " +
                            std::to_string(i));
    }
  }
  std::vector<GridFunction> pressures;
  pressures.reserve(v_steps.size() + 1);
  pressures.push_back(p0);
  for (std::size_t i = 0; i < v_steps.size(); ++i) {
    GridFunction next = pressures.back();
    for (std::size_t j = 0; j < next.values.size(); ++j) {
      next.values[j] += dts[i] * v_steps[i].values[j];
    }
    pressures.push_back(std::move(next));
  }
  return pressures;
}

}  // namespace roughwave

#endif  // ROUGHWAVE_WAVE_HPP
