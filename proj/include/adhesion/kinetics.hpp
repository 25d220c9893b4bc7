#pragma once

/**
 * @file kinetics.hpp
 * @brief Bond age-distribution solver: exact transport along aligned
 *        characteristics, renewal boundary closure, moments, the
 *        characteristics closed form and the weak-form residual.
 */

#include <adhesion/model_core.hpp>
#include <adhesion/trajectory.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace adhesion {

struct KineticsStepInput {
    const StateFields &state;
    std::span<const double> zeta_start; ///< zeta on the grid at the start of the step
    std::span<const double> zeta_end;   ///< zeta at the end of the step; empty = reuse zeta_start
    double beta = 0.0;                  ///< birth rate at the new time level
    double dt = 0.0;
};

struct KineticsStepResult {
    std::vector<double> rho;
    double mu0 = 0.0;
    double dropped = 0.0; ///< mass pushed past the last age node on this step
    std::vector<double> decay; ///< decay[j]: factor along the segment ending at node j >= 1
};

/**
 * @brief Advances rho by one time step.
 *
 * Interior nodes follow their characteristic from (t, a_{j-1}) to
 * (t+dt, a_j) and decay by the trapezoid exponent
 * exp(-(zeta_start[j-1] + zeta_end[j]) da / 2). The boundary value
 * rho[0] = beta (1 - mu0_new) is closed by solving the scalar linear relation
 * mu0_new = (S + w0 beta) / (1 + w0 beta), S being the interior quadrature.
 */
inline KineticsStepResult step_rho(const KineticsStepInput &in, const Grid &grid) {
    const auto &old = in.state.rho;
    const std::size_t n = old.size();
    if (n != grid.n_age || in.zeta_start.size() != n ||
        (!in.zeta_end.empty() && in.zeta_end.size() != n))
        throw Error(ErrorCode::GridMismatch, "kinetics step arrays do not match the grid");
    if (std::abs(in.dt - grid.dt) > kAlignmentTol * grid.dt)
        throw Error(ErrorCode::MisalignedGrid, "step dt differs from the grid dt");
    const auto zeta_end = in.zeta_end.empty() ? in.zeta_start : in.zeta_end;
    const double da = grid.da;

    KineticsStepResult out;
    out.rho.assign(n, 0.0);
    out.decay.assign(n, 1.0);
    for (std::size_t j = 1; j < n; ++j) {
        out.decay[j] = std::exp(-0.5 * (in.zeta_start[j - 1] + zeta_end[j]) * da);
        out.rho[j] = old[j - 1] * out.decay[j];
    }
    out.dropped = old[n - 1] * std::exp(-in.zeta_start[n - 1] * da) * da;

    double interior = 0.0;
    for (std::size_t j = 1; j < n; ++j) interior += trapezoid_weight(j, n, da) * out.rho[j];
    const double w0 = trapezoid_weight(0, n, da);
    out.mu0 = (interior + w0 * in.beta) / (1.0 + w0 * in.beta);
    out.rho[0] = in.beta * (1.0 - out.mu0);

    if (!std::isfinite(out.mu0))
        throw Error(ErrorCode::NonFiniteDensity, "non-finite mass at t = " +
                                                     std::to_string(in.state.t + in.dt));
    for (double r : out.rho)
        if (!std::isfinite(r))
            throw Error(ErrorCode::NonFiniteDensity, "non-finite density at t = " +
                                                         std::to_string(in.state.t + in.dt));
    if (out.mu0 >= 1.0)
        throw Error(ErrorCode::MassBlowup, "mass reached " + std::to_string(out.mu0));
    return out;
}

/// p-th age moment by trapezoid quadrature, p in {0, 1, 2}.
inline double moment(std::span<const double> rho, const Grid &grid, int p) {
    if (p < 0 || p > 2) throw Error(ErrorCode::InvalidParameter, "moment order must be 0, 1 or 2");
    return trapezoid(rho.size(), grid.da, [&](std::size_t j) {
        const double a = grid.age(j);
        return (p == 0 ? 1.0 : (p == 1 ? a : a * a)) * rho[j];
    });
}

/**
 * @brief Uniform-in-time bound on the p-th moment, p in {1, 2}:
 *   sum_{l<=p} p!/(l! zeta_min^{p-l}) mu_l(0) + p!/zeta_min^p * beta_max/(beta_min + zeta_min)
 */
inline double moment_bound(double zeta_min, double beta_min, double beta_max, int p,
                           std::span<const double> initial_moments) {
    if (p < 1 || p > 2) throw Error(ErrorCode::InvalidParameter, "moment bound defined for p = 1, 2");
    if (initial_moments.size() < static_cast<std::size_t>(p + 1))
        throw Error(ErrorCode::InvalidParameter, "need initial moments mu_0..mu_p");
    const auto fact = [](int k) { return k <= 1 ? 1.0 : (k == 2 ? 2.0 : 6.0); };
    double sum = 0.0;
    for (int l = 0; l <= p; ++l)
        sum += fact(p) / (fact(l) * std::pow(zeta_min, p - l)) * initial_moments[static_cast<std::size_t>(l)];
    const double birth = beta_max > 0.0 ? beta_max / (beta_min + zeta_min) : 0.0;
    return sum + fact(p) / std::pow(zeta_min, p) * birth;
}

inline double moment_bound(const ModelParams &params, int p) {
    const auto &d = require_validated(params).derived;
    const double m[3] = {d.mu0, d.mu1, d.mu2};
    return moment_bound(params.offrate.zeta_min(), d.beta_min, d.beta_max, p, m);
}

// ============================================================================
// Characteristics closed form
// ============================================================================

/// Piecewise-linear scalar history, e.g. mu0(t).
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> value;

    [[nodiscard]] double at(double s) const {
        if (t.empty()) throw Error(ErrorCode::HistoryGap, "empty history");
        const double slack = 1e-12 * std::max(1.0, std::abs(t.back()));
        if (s < t.front() - slack || s > t.back() + slack)
            throw Error(ErrorCode::HistoryGap, "history does not cover t = " + std::to_string(s));
        if (s <= t.front()) return value.front();
        if (s >= t.back()) return value.back();
        const auto it = std::upper_bound(t.begin(), t.end(), s);
        const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
        const double w = (s - t[k]) / (t[k + 1] - t[k]);
        return value[k] + w * (value[k + 1] - value[k]);
    }
};

using SpaceTimeFunction = std::function<double(double t, double a)>;

namespace detail {
// composite Simpson of f on [lo, hi]
template <typename F>
double simpson(F &&f, double lo, double hi, int intervals) {
    if (hi <= lo) return 0.0;
    if (intervals % 2) ++intervals;
    const double h = (hi - lo) / intervals;
    double s = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    return s * h / 3.0;
}
} // namespace detail

/**
 * @brief Evaluates rho(t, a) from the two-branch characteristics formula.
 *
 * For a < t/epsilon the bond was born at s = t - epsilon a:
 *   rho = beta(s) (1 - mu0(s)) exp(-int_0^a zeta(s + epsilon b, b) db).
 * Otherwise it descends from the initial data at age a - t/epsilon:
 *   rho = rho_I(a - t/epsilon) exp(-int_{a - t/epsilon}^a zeta(t - epsilon (a - b), b) db).
 * Both exponents are integrated along the characteristic in the age variable.
 */
inline double rho_closed_form(const ModelParams &params, const TimeSeries &mu0_history,
                              const SpaceTimeFunction &zeta, double t, double a,
                              int intervals = 256) {
    const double eps = params.epsilon;
    if (a < t / eps) {
        const double s = t - eps * a;
        const double birth = params.beta.value(s) * (1.0 - mu0_history.at(s));
        const double expo = detail::simpson([&](double b) { return zeta(s + eps * b, b); }, 0.0, a,
                                            intervals);
        return birth * std::exp(-expo);
    }
    const double a0 = a - t / eps;
    const double expo = detail::simpson([&](double b) { return zeta(t - eps * (a - b), b); }, a0, a,
                                        intervals);
    return params.rho_init(a0) * std::exp(-expo);
}

// ============================================================================
// Weak formulation
// ============================================================================

/// Test function with its partial derivatives.
struct TestFunction {
    SpaceTimeFunction phi;
    SpaceTimeFunction phi_t;
    SpaceTimeFunction phi_a;
};

/**
 * @brief Discrete value of the weak formulation of the kinetics equation:
 *
 *   int int rho (eps phi_t + phi_a - zeta phi) - eps int rho(T) phi(T)
 *     + int rho(t,0) phi(t,0) dt + eps int rho_I phi(0) = 0.
 *
 * Ages are integrated by trapezoid on the grid, times by trapezoid over the
 * snapshot times (linear interpolation between snapshots). T is the last
 * snapshot time.
 */
inline double weak_form_residual(const TrajectoryRecord &traj, const ModelParams &params,
                                 const TestFunction &test) {
    const auto &snaps = traj.snapshots;
    if (snaps.size() < 2 || snaps.front().t != 0.0)
        throw Error(ErrorCode::MissingSnapshots, "weak-form residual needs snapshots from t = 0");
    const Grid &grid = traj.grid;
    const double eps = params.epsilon;

    std::vector<double> bulk(snaps.size()), boundary(snaps.size());
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const auto &s = snaps[k];
        if (s.rho.size() != grid.n_age || s.v.size() != grid.n_age)
            throw Error(ErrorCode::GridMismatch, "snapshot does not match the grid");
        bulk[k] = trapezoid(grid.n_age, grid.da, [&](std::size_t j) {
            const double a = grid.age(j);
            const double z = params.offrate(s.v[j]);
            return s.rho[j] * (eps * test.phi_t(s.t, a) + test.phi_a(s.t, a) - z * test.phi(s.t, a));
        });
        boundary[k] = s.rho[0] * test.phi(s.t, 0.0);
    }
    double space_time = 0.0;
    for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
        const double h = snaps[k + 1].t - snaps[k].t;
        space_time += 0.5 * h * (bulk[k] + bulk[k + 1] + boundary[k] + boundary[k + 1]);
    }
    const auto &first = snaps.front();
    const auto &last = snaps.back();
    const double final_term = trapezoid(grid.n_age, grid.da, [&](std::size_t j) {
        return last.rho[j] * test.phi(last.t, grid.age(j));
    });
    const double initial_term = trapezoid(grid.n_age, grid.da, [&](std::size_t j) {
        return first.rho[j] * test.phi(0.0, grid.age(j));
    });
    return space_time - eps * final_term + eps * initial_term;
}

} // namespace adhesion
