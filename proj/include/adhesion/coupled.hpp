#pragma once

/**
 * @file coupled.hpp
 * @brief Coupling of bond kinetics and elongation: explicit co-marching and
 *        the windowed Picard iteration with measured contraction.
 */

#include <adhesion/elongation.hpp>
#include <adhesion/kinetics.hpp>
#include <adhesion/model_core.hpp>
#include <adhesion/trajectory.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace adhesion {

// ============================================================================
// Observables
// ============================================================================

/// Scalar observables of a state; g fields are taken from rhs.
inline Sample observe(const StateFields &s, const ModelParams &params, const RhsValue &rhs,
                      double dropped_total) {
    const Grid &grid = params.mesh();
    Sample out;
    out.t = s.t;
    out.mu0 = s.mu0;
    out.mu1 = moment(s.rho, grid, 1);
    out.mu2 = moment(s.rho, grid, 2);
    out.rho_boundary = s.rho.front();
    out.dropped_mass = dropped_total;
    out.g = rhs.g;
    out.tension = rhs.tension;
    out.tension_abs = rhs.tension_abs;
    out.clamp_active = rhs.clamp_active;
    out.mass_cut_active = rhs.mass_cut_active;
    out.rho_v = trapezoid(grid.n_age, grid.da, [&](std::size_t j) { return s.rho[j] * s.v[j]; });
    out.rho_abs_v =
        trapezoid(grid.n_age, grid.da, [&](std::size_t j) { return s.rho[j] * std::abs(s.v[j]); });
    out.force = params.force.value(s.t);
    out.force_variation = params.force.total_variation(s.t);
    out.xnorm = weighted_sup_norm(s.v, grid);
    out.v_boundary = s.v.front();
    double mrv = kInf, mr = kInf;
    for (std::size_t j = 0; j < s.rho.size(); ++j) {
        mrv = std::min(mrv, s.rho[j] * s.v[j]);
        mr = std::min(mr, s.rho[j]);
    }
    out.min_rho_v = mrv;
    out.min_rho = mr;
    return out;
}

/// Secant slope of f over the step [t, t + dt].
inline double force_slope(const ModelParams &params, double t, double dt) {
    return (params.force.value(t + dt) - params.force.value(t)) / dt;
}

/// Mass below which the binding site is declared torn off:
/// max(mu_detect, 10 w0 beta_max) with w0 the boundary quadrature weight.
inline double tear_off_threshold(const ModelParams &params, double mu_detect) {
    return std::max(mu_detect, 10.0 * 0.5 * params.mesh().da * params.derived.beta_max);
}

// ============================================================================
// Explicit co-marching
// ============================================================================

struct MarchOptions {
    RhsMode mode{};
    std::size_t snapshot_stride = 0; ///< 0 disables field snapshots
    double mu_detect = 1e-4;
    bool detect_tear_off = true;
};

/**
 * @brief Signed tension as seen by the discrete transport.
 *
 * Over one step the quadrature of rho v loses
 * sum_j rho_j v_j (w_j - w_{j+1} E_{j+1}) with E_{j+1} the decay factor of
 * step_rho along the segment leaving node j (w_n = 0). Dividing by da gives
 * a consistent approximation of int zeta(v) v rho whose use in g makes the
 * discrete force balance exact.
 */
inline double transported_tension(std::span<const double> rho, std::span<const double> v,
                                  std::span<const double> decay, const Grid &grid) {
    const std::size_t n = rho.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double kept = j + 1 < n ? trapezoid_weight(j + 1, n, grid.da) * decay[j + 1] : 0.0;
        sum += rho[j] * v[j] * (trapezoid_weight(j, n, grid.da) - kept);
    }
    return sum / grid.da;
}

/// Decay factors exp(-(zeta[j-1] + zeta[j]) da / 2) of a step with zeta frozen.
inline std::vector<double> segment_decay(std::span<const double> zeta, const Grid &grid) {
    std::vector<double> d(zeta.size(), 1.0);
    for (std::size_t j = 1; j < zeta.size(); ++j) d[j] = std::exp(-0.5 * (zeta[j - 1] + zeta[j]) * grid.da);
    return d;
}

/// Mass of bonds of positive age, the ones carrying elongation after a step.
inline double carrying_mass(std::span<const double> rho, double mu0, const Grid &grid) {
    return mu0 - trapezoid_weight(0, rho.size(), grid.da) * rho.front();
}

/// One coupled step from `state`: rho with zeta(v) frozen, then g, then v.
struct CoupledStep {
    KineticsStepResult kin;
    RhsValue rhs;
    std::vector<double> v;
};

/**
 * @brief Source for the step leaving `state`, given the advanced density.
 *        Full mode throws DivisionByZeroMass when no positive-age bonds remain.
 */
inline RhsValue step_rhs(const StateFields &state, const KineticsStepResult &kin, double df_dt,
                         const ModelParams &params, const RhsMode &mode) {
    const Grid &grid = params.mesh();
    const double tension = transported_tension(state.rho, state.v, kin.decay, grid);
    const double p = linkage_tension(state.rho, state.v, grid, params.offrate, true);
    return build_rhs(carrying_mass(kin.rho, kin.mu0, grid), tension, p, df_dt, params.epsilon, mode);
}

inline CoupledStep coupled_step(const StateFields &state, const ModelParams &params,
                                const RhsMode &mode) {
    const Grid &grid = params.mesh();
    const double t1 = state.t + grid.dt;
    const auto zeta = zeta_field(params.offrate, state.v);
    CoupledStep out;
    out.kin = step_rho({state, zeta, {}, params.beta.value(t1), grid.dt}, grid);
    out.rhs = step_rhs(state, out.kin, force_slope(params, state.t, grid.dt), params, mode);
    out.v = step_v(state.v, out.rhs.g, grid);
    return out;
}

/// Tension fields of a state whose outgoing step is not taken; g is NaN.
inline RhsValue terminal_rhs(const StateFields &state, const ModelParams &params) {
    const Grid &grid = params.mesh();
    const auto zeta = zeta_field(params.offrate, state.v);
    RhsValue r;
    r.g = kNaN;
    r.tension = transported_tension(state.rho, state.v, segment_decay(zeta, grid), grid);
    r.tension_abs = linkage_tension(state.rho, state.v, grid, params.offrate, true);
    return r;
}

/**
 * @brief Marches the coupled system to T.
 *
 * Per step: zeta(v) on the grid, step_rho, the source g from the advanced
 * mass and the transported tension, step_v. Stops at T or when the mass
 * falls below the tear-off threshold; the tear-off time is extrapolated
 * linearly to zero mass from the last two levels.
 */
inline TrajectoryRecord march_coupled(const ModelParams &params, const MarchOptions &opt) {
    const Grid &grid = require_validated(params).mesh();
    opt.mode.validate();
    TrajectoryRecord rec;
    rec.grid = grid;
    rec.detection_threshold = tear_off_threshold(params, opt.mu_detect);

    StateFields state = initial_state(params);
    double dropped = 0.0;
    const auto finish = [&] {
        rec.samples.push_back(observe(state, params, terminal_rhs(state, params), dropped));
        if (opt.snapshot_stride > 0) rec.snapshots.push_back({state.t, state.rho, state.v});
    };

    for (std::size_t n = 0; n < grid.n_time; ++n) {
        const double t = grid.time(n);
        const double t1 = grid.time(n + 1);
        state.t = t;
        CoupledStep step;
        try {
            step = coupled_step(state, params, opt.mode);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::DivisionByZeroMass) throw;
            finish();
            rec.outcome = Outcome::TearOff;
            rec.tear_off_time = t;
            return rec;
        }
        rec.samples.push_back(observe(state, params, step.rhs, dropped));
        if (opt.snapshot_stride > 0 && n % opt.snapshot_stride == 0)
            rec.snapshots.push_back({state.t, state.rho, state.v});

        dropped += step.kin.dropped;
        if (dropped > params.dropped_mass_budget)
            throw Error(ErrorCode::DroppedMassBudget,
                        "mass lost past a_max = " + std::to_string(dropped) + " at t = " + std::to_string(t1));

        const double mu_old = state.mu0;
        state.t = t1;
        state.rho = std::move(step.kin.rho);
        state.v = std::move(step.v);
        state.mu0 = step.kin.mu0;

        if (opt.detect_tear_off && state.mu0 < rec.detection_threshold) {
            const double slope = mu_old - state.mu0;
            rec.tear_off_time = slope > 0.0 ? t1 - state.mu0 * (t1 - t) / slope : t1;
            rec.outcome = Outcome::TearOff;
            state.torn_off = true;
            finish();
            return rec;
        }
    }
    finish();
    return rec;
}

// ============================================================================
// Picard iteration on time windows
// ============================================================================

struct PicardConfig {
    double window = 0.05;     ///< initial window length
    double window_max = 0.5;  ///< cap for adaptive growth
    double tol = 1e-10;       ///< X-norm tolerance on successive iterates
    int max_iterations = 60;
    bool adaptive = true;
    RhsMode mode{RhsVariant::DoubleCutoff, 0.1, 10.0};

    void validate() const {
        if (!(window > 0.0) || !(tol > 0.0) || max_iterations < 1)
            throw Error(ErrorCode::InvalidParameter, "Picard window and tolerance must be positive");
        if (mode.variant == RhsVariant::Full)
            throw Error(ErrorCode::InvalidParameter, "Picard iteration requires a cut-off mode");
        mode.validate();
    }
};

struct IterationTrace {
    std::vector<double> differences; ///< ||w^{k+1} - w^k||_X per iteration
    std::vector<double> ratios;      ///< d_{k+1}/d_k when d_k is above round-off
    std::vector<std::size_t> ratio_iteration; ///< index k+1 of each recorded ratio
    bool converged = false;
};

struct WindowSolution {
    std::vector<StateFields> states; ///< slices t_s, t_s + dt, ..., t_s + n dt
    std::vector<RhsValue> rhs;       ///< source used on each step
    double dropped = 0.0;
    IterationTrace trace;
};

namespace detail {
inline double window_difference(const std::vector<std::vector<double>> &a,
                                const std::vector<std::vector<double>> &b, const Grid &grid) {
    double m = 0.0;
    std::vector<double> d(grid.n_age);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < grid.n_age; ++j) d[j] = a[i][j] - b[i][j];
        m = std::max(m, weighted_sup_norm(d, grid));
    }
    return m;
}
} // namespace detail

/**
 * @brief Fixed-point iteration w -> Phi(w) on one window of n_steps steps.
 *
 * Given the iterate v^k on all window slices, rho is advanced with
 * zeta(v^k) frozen, the cut-off source is built from (rho, v^k) and the
 * transport yields v^{k+1}. Iteration stops when the windowed X-norm of
 * v^{k+1} - v^k falls below tol. A ratio >= 1 or exhausting the iteration
 * budget raises NoContraction.
 */
inline WindowSolution picard_window(const ModelParams &params, const StateFields &start,
                                    std::size_t n_steps, const PicardConfig &cfg) {
    const Grid &grid = require_validated(params).mesh();
    cfg.validate();
    if (n_steps == 0) throw Error(ErrorCode::WindowUnderflow, "empty Picard window");

    std::vector<std::vector<double>> vk(n_steps + 1, start.v);
    std::vector<double> f_slope(n_steps), beta_next(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = start.t + grid.time(i);
        f_slope[i] = force_slope(params, t, grid.dt);
        beta_next[i] = params.beta.value(start.t + grid.time(i + 1));
    }

    WindowSolution sol;
    double scale = weighted_sup_norm(start.v, grid);
    double prev = kInf;
    for (int k = 0; k < cfg.max_iterations; ++k) {
        std::vector<StateFields> slices(n_steps + 1);
        std::vector<std::vector<double>> vnext(n_steps + 1);
        std::vector<RhsValue> rhs(n_steps);
        slices[0] = start;
        vnext[0] = start.v;
        double dropped = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            slices[i].v = vk[i];
            const auto zeta = zeta_field(params.offrate, vk[i]);
            KineticsStepResult kin = step_rho({slices[i], zeta, {}, beta_next[i], grid.dt}, grid);
            dropped += kin.dropped;
            rhs[i] = step_rhs(slices[i], kin, f_slope[i], params, cfg.mode);
            vnext[i + 1] = step_v(vnext[i], rhs[i].g, grid);
            slices[i + 1].t = start.t + grid.time(i + 1);
            slices[i + 1].rho = std::move(kin.rho);
            slices[i + 1].mu0 = kin.mu0;
        }

        const double diff = detail::window_difference(vnext, vk, grid);
        for (const auto &v : vnext) scale = std::max(scale, weighted_sup_norm(v, grid));
        const double roundoff = 64.0 * DBL_EPSILON * std::max(1.0, scale);
        sol.trace.differences.push_back(diff);
        if (std::isfinite(prev) && prev > roundoff) {
            sol.trace.ratios.push_back(diff / prev);
            sol.trace.ratio_iteration.push_back(static_cast<std::size_t>(k));
        }

        vk = std::move(vnext);
        if (diff < cfg.tol || diff <= roundoff) {
            for (std::size_t i = 0; i <= n_steps; ++i) slices[i].v = vk[i];
            sol.states = std::move(slices);
            sol.rhs = std::move(rhs);
            sol.dropped = dropped;
            sol.trace.converged = true;
            return sol;
        }
        if (std::isfinite(prev) && prev > roundoff && diff >= prev)
            throw Error(ErrorCode::NoContraction, "iterate difference grew from " +
                                                      std::to_string(prev) + " to " + std::to_string(diff));
        prev = diff;
    }
    throw Error(ErrorCode::NoContraction, "no convergence within " +
                                              std::to_string(cfg.max_iterations) + " iterations");
}

struct Window {
    std::size_t start_step = 0;
    std::size_t n_steps = 0;
};

/// Partitions the time steps of [0, T] into windows of `length`.
inline std::vector<Window> window_schedule(const Grid &grid, double T, double length) {
    if (length < grid.dt * (1.0 - 1e-12))
        throw Error(ErrorCode::WindowUnderflow, "window " + std::to_string(length) +
                                                    " below dt " + std::to_string(grid.dt));
    const auto total = static_cast<std::size_t>(std::llround(T / grid.dt));
    const auto per = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length / grid.dt)));
    std::vector<Window> out;
    for (std::size_t s = 0; s < total; s += per) out.push_back({s, std::min(per, total - s)});
    return out;
}

/// Splits window `index` into two halves; total coverage is unchanged.
inline std::vector<Window> halve_window(const std::vector<Window> &schedule, std::size_t index) {
    const Window w = schedule.at(index);
    if (w.n_steps < 2) throw Error(ErrorCode::WindowUnderflow, "window cannot shrink below one step");
    std::vector<Window> out(schedule.begin(), schedule.begin() + static_cast<std::ptrdiff_t>(index));
    const std::size_t first = w.n_steps / 2;
    out.push_back({w.start_step, first});
    out.push_back({w.start_step + first, w.n_steps - first});
    out.insert(out.end(), schedule.begin() + static_cast<std::ptrdiff_t>(index) + 1, schedule.end());
    return out;
}

struct WindowTrace {
    std::size_t index = 0;
    double t_start = 0.0;
    std::size_t n_steps = 0;
    IterationTrace trace;
    double c_hat = kNaN; ///< measured contraction constant, eps * ratio / window
};

struct PicardRun {
    TrajectoryRecord trajectory;
    std::vector<WindowTrace> windows;
    std::size_t halvings = 0;
};

/**
 * @brief Picard solution on [0, T], window by window. A window failing to
 *        contract is halved and retried; in adaptive mode the next window
 *        is sized to eps / (4 c_hat) from the measured contraction.
 */
inline PicardRun run_picard(const ModelParams &params, const PicardConfig &cfg,
                            std::size_t snapshot_stride = 0) {
    const Grid &grid = require_validated(params).mesh();
    cfg.validate();
    PicardRun run;
    auto &rec = run.trajectory;
    rec.grid = grid;
    rec.detection_threshold = 0.0;

    const double T = grid.t_end();
    std::vector<Window> schedule = window_schedule(grid, T, cfg.window);
    const auto max_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.window_max / grid.dt)));
    StateFields state = initial_state(params);
    double dropped = 0.0;

    for (std::size_t idx = 0; idx < schedule.size();) {
        const Window w = schedule[idx];
        WindowSolution sol;
        try {
            sol = picard_window(params, state, w.n_steps, cfg);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::NoContraction) throw;
            if (w.n_steps < 2)
                throw Error(ErrorCode::WindowUnderflow, "window would fall below dt at t = " +
                                                            std::to_string(state.t));
            schedule = halve_window(schedule, idx);
            ++run.halvings;
            continue;
        }
        WindowTrace wt{run.windows.size(), state.t, w.n_steps, sol.trace, kNaN};
        const auto &d = sol.trace.differences;
        if (d.size() >= 2 && !sol.trace.ratios.empty())
            wt.c_hat = params.epsilon * sol.trace.ratios.front() / (grid.dt * static_cast<double>(w.n_steps));
        run.windows.push_back(wt);

        for (std::size_t i = 0; i < w.n_steps; ++i) {
            const std::size_t step = w.start_step + i;
            if (snapshot_stride > 0 && step % snapshot_stride == 0)
                rec.snapshots.push_back({sol.states[i].t, sol.states[i].rho, sol.states[i].v});
            rec.samples.push_back(observe(sol.states[i], params, sol.rhs[i], dropped));
        }
        dropped += sol.dropped;
        if (dropped > params.dropped_mass_budget)
            throw Error(ErrorCode::DroppedMassBudget, "mass lost past a_max = " + std::to_string(dropped));
        state = std::move(sol.states.back());
        ++idx;

        if (cfg.adaptive && std::isfinite(wt.c_hat) && wt.c_hat > 0.0 && idx < schedule.size()) {
            const double target = params.epsilon / (4.0 * wt.c_hat);
            const auto steps = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::floor(target / grid.dt)), 1, max_steps);
            const std::size_t pos = schedule[idx].start_step;
            schedule.resize(idx);
            for (std::size_t s = pos; s < grid.n_time; s += steps)
                schedule.push_back({s, std::min(steps, grid.n_time - s)});
        }
    }
    rec.samples.push_back(observe(state, params, terminal_rhs(state, params), dropped));
    if (snapshot_stride > 0) rec.snapshots.push_back({state.t, state.rho, state.v});
    return run;
}

} // namespace adhesion
