#pragma once

/**
 * @file elongation.hpp
 * @brief Elongation transport with the full, double cut-off and simple
 *        cut-off right-hand sides.
 */

#include <adhesion/model_core.hpp>
#include <adhesion/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace adhesion {

enum class RhsVariant { Full, DoubleCutoff, SimpleCutoff };

inline const char *to_string(RhsVariant v) {
    switch (v) {
        case RhsVariant::Full: return "full";
        case RhsVariant::DoubleCutoff: return "double_cutoff";
        case RhsVariant::SimpleCutoff: return "simple_cutoff";
    }
    return "unknown";
}

struct RhsMode {
    RhsVariant variant = RhsVariant::Full;
    double mu_cut = 0.1;  ///< lower mass cut-off (cut-off variants)
    double p_cut = kInf;  ///< tension clamp (double cut-off only)

    void validate() const {
        if (variant != RhsVariant::Full && !(mu_cut > 0.0))
            throw Error(ErrorCode::InvalidParameter, "mass cut-off must be positive");
        if (variant == RhsVariant::DoubleCutoff && !(p_cut > 0.0))
            throw Error(ErrorCode::InvalidParameter, "tension cut-off must be positive");
    }
};

/// int zeta(v) v rho da (signed) or int zeta(v) |v| rho da (absolute).
inline double linkage_tension(std::span<const double> rho, std::span<const double> v,
                              const Grid &grid, const OffRateSpec &offrate, bool absolute) {
    return trapezoid(rho.size(), grid.da, [&](std::size_t j) {
        const double u = absolute ? std::abs(v[j]) : v[j];
        return offrate(v[j]) * u * rho[j];
    });
}

struct RhsValue {
    double g = 0.0;
    double tension = 0.0;     ///< signed tension before any clamp
    double tension_abs = 0.0; ///< p(t)
    bool clamp_active = false;
    bool mass_cut_active = false;
};

/**
 * @brief Source term g(t) of the elongation transport.
 *
 *  full          (eps f' + T) / mu0
 *  double_cutoff (eps f' + clamp(T, -p_cut, p_cut)) / max(mu0, mu_cut)
 *  simple_cutoff (eps f' + T) / max(mu0, mu_cut)
 *
 * with T the signed tension. Full mode with mu0 == 0 throws
 * DivisionByZeroMass; callers treat it as tear-off.
 */
inline RhsValue build_rhs(double mu0, double tension, double tension_abs, double df_dt,
                          double epsilon, const RhsMode &mode) {
    RhsValue r;
    r.tension = tension;
    r.tension_abs = tension_abs;
    double numer_tension = tension;
    double mass = mu0;
    switch (mode.variant) {
        case RhsVariant::Full:
            if (mu0 == 0.0) throw Error(ErrorCode::DivisionByZeroMass, "bond mass vanished");
            break;
        case RhsVariant::DoubleCutoff:
            numer_tension = std::clamp(tension, -mode.p_cut, mode.p_cut);
            r.clamp_active = numer_tension != tension;
            [[fallthrough]];
        case RhsVariant::SimpleCutoff:
            mass = std::max(mu0, mode.mu_cut);
            r.mass_cut_active = mu0 < mode.mu_cut;
            break;
    }
    r.g = (epsilon * df_dt + numer_tension) / mass;
    return r;
}

inline RhsValue build_rhs(const StateFields &state, double df_dt, double epsilon,
                          const RhsMode &mode, const OffRateSpec &offrate, const Grid &grid) {
    const double t_signed = linkage_tension(state.rho, state.v, grid, offrate, false);
    const double t_abs = linkage_tension(state.rho, state.v, grid, offrate, true);
    return build_rhs(state.mu0, t_signed, t_abs, df_dt, epsilon, mode);
}

/**
 * @brief One transport step of v with a source constant over the step:
 *        v_new[j] = v_old[j-1] + da g, v_new[0] = 0.
 */
inline std::vector<double> step_v(std::span<const double> v_old, double g, const Grid &grid) {
    const std::size_t n = v_old.size();
    std::vector<double> out(n, 0.0);
    const double inc = grid.da * g;
    for (std::size_t j = 1; j < n; ++j) {
        out[j] = v_old[j - 1] + inc;
        if (!std::isfinite(out[j]))
            throw Error(ErrorCode::NonFiniteElongation, "elongation overflow at node " + std::to_string(j));
    }
    return out;
}

/**
 * @brief Margin of the a-priori X_T estimate
 *        ||v(t) omega|| <= T/(T+eps) ||g||_inf + ||v_I omega||
 *        over all recorded times. Nonnegative means the estimate holds.
 */
inline double xnorm_bound_check(const TrajectoryRecord &traj, double g_sup, double v_init_norm,
                                double epsilon) {
    const double T = traj.final_time();
    const double bound = (T / (T + epsilon)) * g_sup + v_init_norm;
    double margin = kInf;
    for (const auto &s : traj.samples) margin = std::min(margin, bound - s.xnorm);
    return traj.samples.empty() ? bound : margin;
}

} // namespace adhesion
