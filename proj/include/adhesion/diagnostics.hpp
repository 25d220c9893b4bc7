#pragma once

/**
 * @file diagnostics.hpp
 * @brief Runtime checks of the analytic bounds of the model against a
 *        simulated trajectory, and the global / tear-off classifier.
 *
 * Every check reports a margin (bound minus measured value, so that a
 * nonnegative margin means the bound holds) and the absolute slack used,
 * tau = 5 dt max(1, |bound|) unless stated otherwise.
 */

#include <adhesion/coupled.hpp>
#include <adhesion/elongation.hpp>
#include <adhesion/kinetics.hpp>
#include <adhesion/model_core.hpp>
#include <adhesion/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adhesion {

enum class Regime { Global, TearOff, Inconclusive };

inline const char *to_string(Regime r) {
    switch (r) {
        case Regime::Global: return "global";
        case Regime::TearOff: return "tear-off";
        case Regime::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct Check {
    std::string name;
    std::string anchor;      ///< the bound or property being checked
    bool pass = false;
    double margin = 0.0;
    double tolerance = 0.0;
    bool advisory = false;   ///< excluded from the overall verdict (exploratory off-rates)
};

struct DiagnosticsReport {
    std::vector<Check> checks;
    Regime regime = Regime::Inconclusive;
    std::map<std::string, double> constants;
    std::vector<std::string> notes;

    [[nodiscard]] bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const Check &c) { return c.pass || c.advisory; });
    }

    [[nodiscard]] const Check *find(const std::string &name) const {
        for (const auto &c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

/// Absolute slack for first-order quantities: 5 dt max(1, |scale|).
inline double slack(const Grid &grid, double scale) {
    return 5.0 * grid.dt * std::max(1.0, std::abs(scale));
}

inline Check make_check(std::string name, std::string anchor, double margin, double tol) {
    if (!std::isfinite(margin)) margin = margin > 0 ? std::numeric_limits<double>::max() : -std::numeric_limits<double>::max();
    return {std::move(name), std::move(anchor), margin >= -tol, margin, tol, false};
}

// ============================================================================
// Stability functionals
// ============================================================================

/**
 * @brief k = 0: int |rho_hat| + |int rho_hat|;
 *        k >= 1: int (1+a)^k |rho_hat|.
 */
inline double h_functional(std::span<const double> rho_hat, const Grid &grid, int k) {
    if (k < 0) throw Error(ErrorCode::InvalidParameter, "functional order must be nonnegative");
    const std::size_t n = rho_hat.size();
    if (k == 0) {
        const double abs_int = trapezoid(n, grid.da, [&](std::size_t j) { return std::abs(rho_hat[j]); });
        const double signed_int = trapezoid(n, grid.da, [&](std::size_t j) { return rho_hat[j]; });
        return abs_int + std::abs(signed_int);
    }
    return trapezoid(n, grid.da, [&](std::size_t j) {
        return std::pow(1.0 + grid.age(j), k) * std::abs(rho_hat[j]);
    });
}

/// h_functional of rho_2 - rho_1; GridMismatch when the arrays differ in size.
inline double h_difference(std::span<const double> rho2, std::span<const double> rho1,
                           const Grid &grid, int k) {
    if (rho1.size() != rho2.size() || rho1.size() != grid.n_age)
        throw Error(ErrorCode::GridMismatch, "densities live on different grids");
    std::vector<double> d(rho1.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = rho2[j] - rho1[j];
    return h_functional(d, grid, k);
}

/**
 * @brief Envelope constants h_0..h_k for the functionals of the difference of
 *        two densities driven by off-rates zeta(w_1), zeta(w_2).
 *
 * h_0 = 2 L mu_1max / zeta_min and
 * h_k = (k h_{k-1} + beta_max h_0 + L C_{k+1}) / zeta_min,
 * with C_{k+1} >= int (1+a)^{k+1} rho expanded over the moment bounds
 * (the zeroth moment is bounded by 1).
 */
inline std::vector<double> stability_constants(const ModelParams &params, int k_max) {
    const auto &d = require_validated(params).derived;
    const double zmin = params.offrate.zeta_min();
    const double L = params.offrate.lipschitz();
    const double m1 = moment_bound(params, 1);
    const double m2 = moment_bound(params, 2);
    // moment bound of order 3 from the same recursion, mu_3(0) by quadrature
    const auto rho = sample(params.rho_init, d.grid);
    const double mu3_0 = trapezoid(d.grid.n_age, d.grid.da, [&](std::size_t j) {
        const double a = d.grid.age(j);
        return a * a * a * rho[j];
    });
    const double m3 = mu3_0 + 3.0 / zmin * m2;
    const double mom[4] = {1.0, m1, m2, m3};
    const auto C = [&](int p) {
        // int (1+a)^p rho = sum binom(p,l) mu_l
        static const double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
        double s = 0.0;
        for (int l = 0; l <= p; ++l) s += binom[p][l] * mom[l];
        return s;
    };
    if (k_max > 2) throw Error(ErrorCode::InvalidParameter, "envelopes available up to k = 2");
    std::vector<double> h(static_cast<std::size_t>(k_max) + 1);
    h[0] = 2.0 / zmin * L * m1;
    for (int k = 1; k <= k_max; ++k)
        h[static_cast<std::size_t>(k)] =
            (k * h[static_cast<std::size_t>(k - 1)] + d.beta_max * h[0] + L * C(k + 1)) / zmin;
    return h;
}

struct StabilityResult {
    std::vector<double> constants;     ///< h_0, h_1, h_2
    std::vector<double> worst_margin;  ///< per k, min over t of envelope - H_k
    std::vector<double> max_value;     ///< per k, sup over t of H_k
    double w_gap = 0.0;                ///< ||w_2 - w_1||_{X_T}
    double growing_margin = 0.0;       ///< H_0 margin with the growing exponent
};

/**
 * @brief Marches two kinetics problems with off-rates zeta(w_1(t,a)) and
 *        zeta(w_2(t,a)) on the same grid and compares H_k of the difference
 *        with h_k (1 - exp(-zeta_min t / eps)) ||w_2 - w_1||_{X_t}, k = 0, 1, 2.
 */
inline StabilityResult stability_pair_check(const ModelParams &params, const SpaceTimeFunction &w1,
                                            const SpaceTimeFunction &w2) {
    const Grid &grid = require_validated(params).mesh();
    StabilityResult out;
    out.constants = stability_constants(params, 2);
    out.worst_margin.assign(3, kInf);
    out.max_value.assign(3, 0.0);
    out.growing_margin = kInf;

    StateFields s1 = initial_state(params), s2 = s1;
    std::vector<double> v1(grid.n_age), v2(grid.n_age);
    const auto fill = [&](double t) {
        double gap = 0.0;
        for (std::size_t j = 0; j < grid.n_age; ++j) {
            const double a = grid.age(j);
            v1[j] = w1(t, a);
            v2[j] = w2(t, a);
            gap = std::max(gap, std::abs(v2[j] - v1[j]) / (1.0 + a));
        }
        out.w_gap = std::max(out.w_gap, gap);
    };
    const double zmin = params.offrate.zeta_min();
    for (std::size_t n = 0; n < grid.n_time; ++n) {
        const double t = grid.time(n);
        const double t1 = grid.time(n + 1);
        fill(t);
        s1.t = s2.t = t;
        const auto z1 = zeta_field(params.offrate, v1);
        const auto z2 = zeta_field(params.offrate, v2);
        const double beta = params.beta.value(t1);
        auto k1 = step_rho({s1, z1, {}, beta, grid.dt}, grid);
        auto k2 = step_rho({s2, z2, {}, beta, grid.dt}, grid);
        s1.rho = std::move(k1.rho);
        s1.mu0 = k1.mu0;
        s2.rho = std::move(k2.rho);
        s2.mu0 = k2.mu0;
        // the gap norm over [0, t1] includes the fields used on this step
        fill(t1);
        const double decay = 1.0 - std::exp(-zmin * t1 / params.epsilon);
        for (int k = 0; k <= 2; ++k) {
            const double H = h_difference(s2.rho, s1.rho, grid, k);
            const auto ks = static_cast<std::size_t>(k);
            out.max_value[ks] = std::max(out.max_value[ks], H);
            out.worst_margin[ks] =
                std::min(out.worst_margin[ks], out.constants[ks] * decay * out.w_gap - H);
            if (k == 0) {
                const double grow = 1.0 - std::exp(zmin * t1 / params.epsilon);
                out.growing_margin = std::min(out.growing_margin, out.constants[0] * grow * out.w_gap - H);
            }
        }
    }
    return out;
}

// ============================================================================
// A-priori and Riccati bounds
// ============================================================================

/// int rho_I |v_I| + int_0^t |f'|
inline double apriori_bound(const ModelParams &params, double t) {
    const Grid &grid = require_validated(params).mesh();
    const auto rho = sample(params.rho_init, grid);
    const double init = trapezoid(grid.n_age, grid.da, [&](std::size_t j) {
        return rho[j] * std::abs(params.v_init(grid.age(j)));
    });
    return init + params.force.total_variation(t);
}

/// min over t of [int rho_I |v_I| + int_0^t |f'| - int rho(t) |v(t)|].
inline Check apriori_estimate_check(const TrajectoryRecord &traj) {
    double margin = kInf;
    double scale = 0.0;
    const double init = traj.samples.empty() ? 0.0 : traj.samples.front().rho_abs_v;
    for (const auto &s : traj.samples) {
        const double bound = init + s.force_variation;
        scale = std::max(scale, bound);
        margin = std::min(margin, bound - s.rho_abs_v);
    }
    return make_check("apriori_estimate", "int rho|v| <= int rho_I|v_I| + int|f'|", margin,
                      slack(traj.grid, scale));
}

/**
 * @brief Bound for positive y with eps y' <= -A y^2 + B y + C:
 *        max(y0, y+), y+ = (B + sqrt(B^2 + 4AC)) / (2A).
 */
inline double riccati_bound(double A, double B, double C, double y0) {
    if (!(A > 0.0)) throw Error(ErrorCode::BadCoefficients, "Riccati bound needs A > 0");
    if (C < 0.0 || !(y0 > 0.0))
        throw Error(ErrorCode::BadCoefficients, "Riccati bound needs C >= 0 and y0 > 0");
    const double yp = (B + std::sqrt(B * B + 4.0 * A * C)) / (2.0 * A);
    return std::max(y0, yp);
}

struct TensionConstants {
    double apriori = 0.0; ///< 1 / gamma1
    double gamma1 = kInf;
    double h = 0.0;
    double gamma2 = 0.0;
};

/**
 * @brief gamma_2 controlling p(t) <= gamma_2 / mu_cut on [0, T]:
 *        gamma_1 = 1 / (int rho_I |v_I| + int_0^T |f'|),
 *        h = eps ||f'|| (2 L / gamma_1 + zeta(0)),
 *        gamma_2 = max(p(0), (1 + sqrt(1 + 4 h gamma_1)) / (2 gamma_1)).
 * A vanishing a-priori bound forces int rho |v| = 0, hence gamma_2 = p(0).
 */
inline TensionConstants compute_gamma2(const ModelParams &params, double T, double p0) {
    const auto &d = require_validated(params).derived;
    TensionConstants c;
    c.apriori = apriori_bound(params, T);
    if (!(c.apriori > 0.0)) {
        c.gamma2 = p0;
        return c;
    }
    c.gamma1 = 1.0 / c.apriori;
    c.h = params.epsilon * d.force.lipschitz *
          (2.0 * params.offrate.lipschitz() / c.gamma1 + params.offrate.at_zero());
    c.gamma2 = std::max(p0, (1.0 + std::sqrt(1.0 + 4.0 * c.h * c.gamma1)) / (2.0 * c.gamma1));
    return c;
}

struct TensionCheck {
    TensionConstants constants;
    Check check;
};

/// p(t) <= gamma_2 / mu_cut over the run.
inline TensionCheck tension_bound_check(const TrajectoryRecord &traj, const ModelParams &params,
                                        double mu_cut) {
    TensionCheck out;
    const double p0 = traj.samples.empty() ? 0.0 : traj.samples.front().tension_abs;
    out.constants = compute_gamma2(params, traj.final_time(), p0);
    const double bound = out.constants.gamma2 / mu_cut;
    double margin = kInf;
    for (const auto &s : traj.samples) margin = std::min(margin, bound - s.tension_abs);
    out.check = make_check("tension_bound", "p(t) <= gamma2 / mu_cut", margin, slack(traj.grid, bound));
    return out;
}

// ============================================================================
// Mass bounds
// ============================================================================

/// Largest admissible gamma_0 (exclusive): min(1 - mu0(0), zeta_min / (zeta_min + beta_max)).
inline double gamma0_limit(const ModelParams &params) {
    const auto &d = require_validated(params).derived;
    const double zmin = params.offrate.zeta_min();
    return std::min(1.0 - d.mu0, zmin / (zmin + d.beta_max));
}

/// mu0(t) < 1 - gamma0 over the run; BadGamma0 when gamma0 is not admissible.
inline Check mass_upper_gap_check(const TrajectoryRecord &traj, const ModelParams &params,
                                  double gamma0) {
    const double lim = gamma0_limit(params);
    if (!(gamma0 > 0.0) || !(gamma0 < lim))
        throw Error(ErrorCode::BadGamma0, "gamma0 = " + std::to_string(gamma0) +
                                              " must lie in (0, " + std::to_string(lim) + ")");
    double margin = kInf;
    for (const auto &s : traj.samples) margin = std::min(margin, 1.0 - gamma0 - s.mu0);
    return make_check("mass_upper_gap", "mu0 < 1 - gamma0", margin, slack(traj.grid, 1.0));
}

/// zeta(0) + int zeta(v_I) rho_I / mu0(0)
inline double zeta_bar(const ModelParams &params) {
    const auto &d = require_validated(params).derived;
    const auto rho = sample(params.rho_init, d.grid);
    const double s = trapezoid(d.grid.n_age, d.grid.da, [&](std::size_t j) {
        return params.offrate(params.v_init(d.grid.age(j))) * rho[j];
    });
    return params.offrate.at_zero() + s / d.mu0;
}

struct MassLower {
    double zeta_bar = 0.0;
    double lambda_bar = 0.0;
    double mu_min = 0.0;
    Check check;
};

/**
 * @brief lambda = zeta_bar + L ||g|| min(2 / (gamma0 beta_min), T / eps),
 *        mu_min = min(mu0(0), beta_min / (beta_min + lambda)), and the run
 *        check mu0(t) >= mu_min.
 */
inline MassLower mass_lower_bound(const ModelParams &params, double g_norm, double T,
                                  double gamma0, const TrajectoryRecord *traj = nullptr) {
    const auto &d = require_validated(params).derived;
    if (!(gamma0 > 0.0) || !(gamma0 < gamma0_limit(params)))
        throw Error(ErrorCode::BadGamma0, "gamma0 = " + std::to_string(gamma0) + " not admissible");
    MassLower out;
    out.zeta_bar = zeta_bar(params);
    const double window = std::min(2.0 / (gamma0 * d.beta_min), T / params.epsilon);
    out.lambda_bar = out.zeta_bar + params.offrate.lipschitz() * g_norm * window;
    out.mu_min = std::min(d.mu0, d.beta_min / (d.beta_min + out.lambda_bar));
    double margin = kInf;
    Grid grid = d.grid;
    if (traj) {
        grid = traj->grid;
        for (const auto &s : traj->samples) margin = std::min(margin, s.mu0 - out.mu_min);
    }
    out.check = make_check("mass_lower_bound", "mu0 >= beta_min / (beta_min + lambda)", margin,
                           slack(grid, out.mu_min));
    return out;
}

/**
 * @brief Time over which the cut-off and full systems coincide:
 *        (eps / gamma3) (beta_min mu_cut - (beta_min + zeta_bar) mu_cut^2),
 *        gamma3 = L (eps ||f'|| + gamma2). Infinite for L = 0.
 */
inline double local_existence_window(const ModelParams &params, double mu_cut, double gamma2) {
    const auto &d = require_validated(params).derived;
    if (!(mu_cut > 0.0) || !(mu_cut < 1.0))
        throw Error(ErrorCode::InvalidParameter, "mass cut-off must lie in (0,1)");
    const double gamma3 = params.offrate.lipschitz() * (params.epsilon * d.force.lipschitz + gamma2);
    const double num = d.beta_min * mu_cut - (d.beta_min + zeta_bar(params)) * mu_cut * mu_cut;
    if (!(num > 0.0))
        throw Error(ErrorCode::NonPositiveWindow, "local window is not positive: numerator " +
                                                      std::to_string(num));
    if (gamma3 == 0.0) return kInf;
    return params.epsilon / gamma3 * num;
}

// ============================================================================
// Regimes
// ============================================================================

struct GlobalRegime {
    double zeta_breve = 0.0;
    bool global = false;
    double mu_min = 0.0;
    std::optional<Check> check;
};

/**
 * @brief zeta_breve = zeta(0) + L (int rho_I |v_I| + int_0^T |f'|). When
 *        beta_min > zeta_breve the run must stay attached with
 *        mu0 >= min(1 - zeta_breve / beta_min, mu0(0)).
 */
inline GlobalRegime global_regime_check(const ModelParams &params, const TrajectoryRecord &traj) {
    const auto &d = require_validated(params).derived;
    GlobalRegime out;
    out.zeta_breve = params.offrate.at_zero() + params.offrate.lipschitz() * apriori_bound(params, d.grid.t_end());
    out.global = d.beta_min > out.zeta_breve;
    if (!out.global) return out;
    out.mu_min = std::min(1.0 - out.zeta_breve / d.beta_min, d.mu0);
    double margin = kInf;
    for (const auto &s : traj.samples) margin = std::min(margin, s.mu0 - out.mu_min);
    if (traj.outcome == Outcome::TearOff) margin = std::min(margin, -1.0);
    out.check = make_check("global_mass_floor", "mu0 >= min(1 - zeta_breve / beta_min, mu0(0))",
                           margin, slack(traj.grid, out.mu_min));
    return out;
}

/// Hypotheses of the tear-off estimate; empty string when all hold.
inline std::string tearoff_hypothesis_failure(const ModelParams &params) {
    const auto &d = require_validated(params).derived;
    if (!(params.offrate.minorant_slope() > 0.0)) return "minorant slope";
    const auto v = sample(params.v_init, d.grid);
    for (double x : v)
        if (x < 0.0) return "nonnegative initial elongation";
    if (!(d.force.derivative_min > 0.0)) return "increasing force";
    if (!(d.beta_max < params.offrate.minorant_slope() * d.force.min)) return "slope condition";
    return {};
}

/// t0 = eps / (beta_min + zc) ln(1 + mu0(0) (beta_min + zc) / (zc' f_min - beta_max))
inline double tearoff_time_bound(const ModelParams &params) {
    if (const auto fail = tearoff_hypothesis_failure(params); !fail.empty())
        throw Error(ErrorCode::HypothesisViolated, fail);
    const auto &d = params.derived;
    const double zc = params.offrate.minorant_intercept();
    const double zc1 = params.offrate.minorant_slope();
    const double k = d.beta_min + zc;
    return params.epsilon / k * std::log(1.0 + d.mu0 * k / (zc1 * d.force.min - d.beta_max));
}

struct TearoffCertificate {
    double t0 = 0.0;
    double gamma6 = 0.0;
    std::vector<Check> checks;
};

/**
 * @brief Checks a run against the tear-off estimate: rho v >= 0, the linear
 *        mass envelope (1 - t/t0) mu0(0), detection before t0 and the lower
 *        bound eps gamma6 ln(1 + min(t, eps a) / (t0 - t)) on the elongation
 *        profile (snapshots only). Throws HypothesisViolated.
 */
inline TearoffCertificate tearoff_certificate(const ModelParams &params, const TrajectoryRecord &traj) {
    TearoffCertificate out;
    out.t0 = tearoff_time_bound(params);
    const auto &d = params.derived;
    const Grid &grid = traj.grid;
    out.gamma6 = out.t0 * d.force.derivative_min / d.mu0;

    double sign_margin = kInf;
    for (const auto &s : traj.samples) sign_margin = std::min(sign_margin, s.min_rho_v);
    out.checks.push_back(make_check("tearoff_sign", "rho v >= 0", sign_margin, 0.0));

    double env = kInf;
    for (const auto &s : traj.samples)
        env = std::min(env, (1.0 - s.t / out.t0) * d.mu0 - s.mu0);
    out.checks.push_back(make_check("tearoff_mass_envelope", "mu0 <= (1 - t/t0) mu0(0)", env,
                                    5.0 * grid.dt));

    const double t_star = traj.outcome == Outcome::TearOff ? traj.tear_off_time : kInf;
    out.checks.push_back(make_check("tearoff_time", "t* <= t0", out.t0 * 1.05 + 2.0 * grid.dt - t_star,
                                    0.0));

    double prof = kInf;
    double vscale = 0.0;
    for (const auto &snap : traj.snapshots) {
        if (!(snap.t > 0.0) || !(snap.t < out.t0)) continue;
        for (std::size_t j = 0; j < snap.v.size(); ++j) {
            const double a = grid.age(j);
            const double lower = params.epsilon * out.gamma6 *
                                 std::log(1.0 + std::min(snap.t, params.epsilon * a) / (out.t0 - snap.t));
            vscale = std::max(vscale, lower);
            prof = std::min(prof, snap.v[j] - lower);
        }
    }
    if (std::isfinite(prof))
        out.checks.push_back(make_check("tearoff_profile", "v >= eps gamma6 ln(1 + min(t, eps a)/(t0 - t))",
                                        prof, slack(grid, vscale)));
    return out;
}

/**
 * @brief zc'(0) int v rho <= int zeta(v) rho - zc(0) mu0 on a slice; the
 *        margin is right side minus left side. Empty for slices with v < 0.
 */
inline std::optional<double> convexity_minorant_check(const OffRateSpec &offrate,
                                                      std::span<const double> rho,
                                                      std::span<const double> v, const Grid &grid) {
    for (double x : v)
        if (x < 0.0) return std::nullopt;
    const std::size_t n = rho.size();
    const double lhs = offrate.minorant_slope() * trapezoid(n, grid.da, [&](std::size_t j) { return v[j] * rho[j]; });
    const double zr = trapezoid(n, grid.da, [&](std::size_t j) { return offrate(v[j]) * rho[j]; });
    const double mu0 = trapezoid(rho, grid.da);
    return zr - offrate.minorant_intercept() * mu0 - lhs;
}

// ============================================================================
// Aggregate report
// ============================================================================

struct DiagnosticsOptions {
    RhsMode mode{};
    std::optional<double> gamma0{}; ///< default: half the admissible limit
};

/**
 * @brief Runs every applicable check on a trajectory. Checks relying on the
 *        Lipschitz theory are advisory for exploratory off-rates.
 */
inline DiagnosticsReport evaluate(const ModelParams &params, const TrajectoryRecord &traj,
                                  const DiagnosticsOptions &opt) {
    const auto &d = require_validated(params).derived;
    const Grid &grid = traj.grid;
    DiagnosticsReport rep;
    auto &K = rep.constants;
    const bool exploratory = params.offrate.exploratory();
    const auto add = [&](Check c, bool theory = true) {
        c.advisory = exploratory && theory;
        rep.checks.push_back(std::move(c));
    };
    for (const auto &w : d.warnings) rep.notes.push_back(w);

    // invariants
    double min_rho = kInf, mass_gap = kInf, boundary = 0.0;
    for (const auto &s : traj.samples) {
        min_rho = std::min(min_rho, s.min_rho);
        mass_gap = std::min(mass_gap, 1.0 - s.mu0);
        if (s.t > 0.0) boundary = std::max(boundary, std::abs(s.v_boundary));
    }
    add(make_check("density_nonnegative", "rho >= 0", min_rho, 0.0), false);
    add({"mass_below_one", "mu0 < 1", mass_gap > 0.0, mass_gap, 0.0, false}, false);
    add(make_check("boundary_elongation", "v(t,0) = 0", 0.0 - boundary, 0.0), false);
    const double m1 = moment_bound(params, 1), m2 = moment_bound(params, 2);
    K["mu1_max"] = m1;
    K["mu2_max"] = m2;
    double mm1 = kInf, mm2 = kInf;
    for (const auto &s : traj.samples) {
        mm1 = std::min(mm1, m1 - s.mu1);
        mm2 = std::min(mm2, m2 - s.mu2);
    }
    add(make_check("moment1_bound", "mu1 <= mu1_max", mm1, slack(grid, m1)), false);
    add(make_check("moment2_bound", "mu2 <= mu2_max", mm2, slack(grid, m2)), false);

    add(apriori_estimate_check(traj));
    const double g_sup = traj.g_sup();
    const auto v_init = sample(params.v_init, d.grid);
    const double vi_norm = weighted_sup_norm(v_init, d.grid);
    K["g_sup"] = g_sup;
    {
        const double margin = xnorm_bound_check(traj, g_sup, vi_norm, params.epsilon);
        const double T = traj.final_time();
        add(make_check("xnorm_bound", "||v w|| <= T/(T+eps) ||g|| + ||v_I w||", margin,
                       slack(grid, T / (T + params.epsilon) * g_sup + vi_norm)),
            false);
    }

    const double g0 = opt.gamma0 ? *opt.gamma0 : 0.5 * gamma0_limit(params);
    K["gamma0"] = g0;
    try {
        add(mass_upper_gap_check(traj, params, g0), false);
        const auto ml = mass_lower_bound(params, g_sup, traj.final_time(), g0, &traj);
        K["zeta_bar"] = ml.zeta_bar;
        K["lambda_bar"] = ml.lambda_bar;
        K["mu_min"] = ml.mu_min;
        add(ml.check);
    } catch (const Error &e) {
        if (e.code() != ErrorCode::BadGamma0) throw;
        rep.notes.push_back(e.what());
    }

    if (opt.mode.variant != RhsVariant::Full) {
        const auto tb = tension_bound_check(traj, params, opt.mode.mu_cut);
        K["gamma1"] = tb.constants.gamma1;
        K["gamma2"] = tb.constants.gamma2;
        K["riccati_h"] = tb.constants.h;
        add(tb.check);
        if (opt.mode.variant == RhsVariant::DoubleCutoff && opt.mode.p_cut > tb.constants.gamma2 / opt.mode.mu_cut) {
            double fired = 0.0;
            for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k)
                if (traj.samples[k].clamp_active) fired += 1.0;
            add({"clamp_inactive", "p_cut > gamma2 / mu_cut keeps the clamp off", fired == 0.0, 0.0 - fired, 0.0, false});
        }
        try {
            const double T_loc = local_existence_window(params, opt.mode.mu_cut, tb.constants.gamma2);
            K["gamma3"] = params.offrate.lipschitz() * (params.epsilon * d.force.lipschitz + tb.constants.gamma2);
            K["local_window"] = T_loc;
            double margin = kInf;
            for (const auto &s : traj.samples)
                if (s.t > 0.0 && s.t < T_loc) margin = std::min(margin, s.mu0 - opt.mode.mu_cut);
            if (std::isfinite(margin))
                add(make_check("local_window_mass", "mu0 > mu_cut on (0, T_local)", margin, 0.0));
        } catch (const Error &e) {
            if (e.code() != ErrorCode::NonPositiveWindow) throw;
            rep.notes.push_back(e.what());
        }
    }

    const auto gr = global_regime_check(params, traj);
    K["zeta_breve"] = gr.zeta_breve;
    if (gr.global) {
        rep.regime = Regime::Global;
        K["mu_min_global"] = gr.mu_min;
        add(*gr.check);
    }

    const std::string fail = tearoff_hypothesis_failure(params);
    if (fail.empty()) {
        const auto cert = tearoff_certificate(params, traj);
        K["t0"] = cert.t0;
        K["gamma6"] = cert.gamma6;
        for (const auto &c : cert.checks) add(c);
        if (rep.regime != Regime::Global) rep.regime = Regime::TearOff;
    } else {
        rep.notes.push_back("tear-off estimate not applicable: " + fail);
    }
    if (traj.outcome == Outcome::TearOff) {
        K["t_star"] = traj.tear_off_time;
        if (rep.regime == Regime::Inconclusive) rep.regime = Regime::TearOff;
    }

    double conv = kInf;
    for (const auto &snap : traj.snapshots)
        if (const auto m = convexity_minorant_check(params.offrate, snap.rho, snap.v, grid))
            conv = std::min(conv, *m);
    if (std::isfinite(conv))
        add(make_check("convexity_minorant", "zc'(0) int v rho <= int zeta(v) rho - zc(0) mu0", conv,
                       slack(grid, 1.0)),
            false);
    return rep;
}

} // namespace adhesion
