#pragma once

/**
 * @file position_delay.hpp
 * @brief Binding-site position from the delay force balance
 *        (1/eps) int (z(t) - z(t - eps a)) rho(t,a) da = f(t),
 *        and reconstruction of the elongation from positions.
 */

#include <adhesion/coupled.hpp>
#include <adhesion/kinetics.hpp>
#include <adhesion/model_core.hpp>
#include <adhesion/trajectory.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace adhesion {

/// Known positions z_p(s) for s < 0, continuous up to z(0) = z_p(0-).
struct PastPosition {
    std::function<double(double)> z_p;
    double z0 = 0.0;

    /// Past positions compatible with an initial elongation:
    /// v_I(a) = (z0 - z_p(-eps a)) / eps.
    static PastPosition from_elongation(const AgeFunction &v_init, double epsilon, double z0 = 0.0) {
        return {[=](double s) { return z0 - epsilon * v_init(-s / epsilon); }, z0};
    }
};

/// Positions on the time grid plus the past.
class PositionHistory {
  public:
    PositionHistory(PastPosition past, const Grid &grid) : past_(std::move(past)), grid_(grid) {
        z_.push_back(past_.z0);
    }

    void push(double z) { z_.push_back(z); }
    [[nodiscard]] std::size_t size() const { return z_.size(); }
    [[nodiscard]] double latest() const { return z_.back(); }

    /// z(t_n - j dt); negative times come from the past function.
    [[nodiscard]] double lagged(std::size_t n, std::size_t j) const {
        if (n >= z_.size())
            throw Error(ErrorCode::HistoryGap, "position at step " + std::to_string(n) + " not yet known");
        if (j <= n) return z_[n - j];
        return past_.z_p(-grid_.time(j - n));
    }

  private:
    PastPosition past_;
    Grid grid_;
    std::vector<double> z_;
};

/**
 * @brief Solves the discrete force balance for z(t).
 *
 * With z_lag[j] = z(t - eps a_j) for j >= 1 the trapezoid balance
 * sum_j w_j (z - z_lag[j]) rho[j] = eps f is linear in z; the a = 0 term
 * vanishes identically, so z = (eps f + sum_{j>=1} w_j z_lag[j] rho[j]) / sum_{j>=1} w_j rho[j].
 */
inline double solve_z_step(std::span<const double> z_lag, std::span<const double> rho, double f_t,
                           double mu0, double epsilon, const Grid &grid) {
    if (!(mu0 > 0.0)) throw Error(ErrorCode::ZeroMass, "force balance degenerates at zero mass");
    const std::size_t n = rho.size();
    double mass = 0.0, lagged = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        const double w = trapezoid_weight(j, n, grid.da) * rho[j];
        mass += w;
        lagged += w * z_lag[j];
    }
    if (!(mass > 0.0)) throw Error(ErrorCode::ZeroMass, "no bonds of positive age");
    return (epsilon * f_t + lagged) / mass;
}

/// v(t_n, a_j) = (z(t_n) - z(t_n - eps a_j)) / eps.
inline std::vector<double> v_from_z(const PositionHistory &history, std::size_t n, double epsilon,
                                    const Grid &grid) {
    std::vector<double> v(grid.n_age);
    const double zn = history.lagged(n, 0);
    for (std::size_t j = 0; j < grid.n_age; ++j) v[j] = (zn - history.lagged(n, j)) / epsilon;
    return v;
}

/// |int rho v - f(t)|
inline double force_balance_residual(std::span<const double> rho, std::span<const double> v,
                                     double f_t, const Grid &grid) {
    return std::abs(trapezoid(rho.size(), grid.da, [&](std::size_t j) { return rho[j] * v[j]; }) - f_t);
}

/**
 * @brief Marches the position route: v from past positions drives the
 *        off-rate, rho advances as in march_coupled, then z solves the
 *        balance at the new time level. The recorded g is the source the
 *        elongation transport would need to reproduce the new positions,
 *        (z(t + dt) - z(t)) / dt.
 */
inline TrajectoryRecord march_z_route(const ModelParams &params, const MarchOptions &opt) {
    const Grid &grid = require_validated(params).mesh();
    TrajectoryRecord rec;
    rec.grid = grid;
    rec.detection_threshold = tear_off_threshold(params, opt.mu_detect);

    PositionHistory history(PastPosition::from_elongation(params.v_init, params.epsilon), grid);
    StateFields state = initial_state(params);
    double dropped = 0.0;
    const auto finish = [&] {
        Sample s = observe(state, params, terminal_rhs(state, params), dropped);
        s.z = history.latest();
        rec.samples.push_back(s);
        if (opt.snapshot_stride > 0) rec.snapshots.push_back({state.t, state.rho, state.v});
    };

    std::vector<double> z_lag(grid.n_age);
    for (std::size_t n = 0; n < grid.n_time; ++n) {
        const double t = grid.time(n);
        const double t1 = grid.time(n + 1);
        state.t = t;
        state.v = v_from_z(history, n, params.epsilon, grid);
        const auto zeta = zeta_field(params.offrate, state.v);
        KineticsStepResult kin = step_rho({state, zeta, {}, params.beta.value(t1), grid.dt}, grid);

        for (std::size_t j = 1; j < grid.n_age; ++j) z_lag[j] = history.lagged(n, j - 1);
        double z_new = kNaN;
        try {
            z_new = solve_z_step(z_lag, kin.rho, params.force.value(t1), kin.mu0, params.epsilon, grid);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ZeroMass) throw;
        }

        RhsValue rhs;
        rhs.g = (z_new - history.latest()) / grid.dt;
        rhs.tension = transported_tension(state.rho, state.v, kin.decay, grid);
        rhs.tension_abs = linkage_tension(state.rho, state.v, grid, params.offrate, true);
        Sample s = observe(state, params, rhs, dropped);
        s.z = history.latest();
        rec.samples.push_back(s);
        if (opt.snapshot_stride > 0 && n % opt.snapshot_stride == 0)
            rec.snapshots.push_back({state.t, state.rho, state.v});

        dropped += kin.dropped;
        if (dropped > params.dropped_mass_budget)
            throw Error(ErrorCode::DroppedMassBudget, "mass lost past a_max = " + std::to_string(dropped));
        const double mu_old = state.mu0;
        state.rho = std::move(kin.rho);
        state.mu0 = kin.mu0;
        state.t = t1;
        if (std::isnan(z_new)) {
            // no bonds of positive age: positions are undefined from here on
            rec.tear_off_time = t1;
            rec.outcome = Outcome::TearOff;
            state.torn_off = true;
            state.v = step_v(state.v, 0.0, grid);
            finish();
            return rec;
        }
        history.push(z_new);
        if (opt.detect_tear_off && state.mu0 < rec.detection_threshold) {
            const double slope = mu_old - state.mu0;
            rec.tear_off_time = slope > 0.0 ? t1 - state.mu0 * (t1 - t) / slope : t1;
            rec.outcome = Outcome::TearOff;
            state.torn_off = true;
            state.v = v_from_z(history, n + 1, params.epsilon, grid);
            finish();
            return rec;
        }
    }
    state.v = v_from_z(history, grid.n_time, params.epsilon, grid);
    finish();
    return rec;
}

} // namespace adhesion
