#pragma once

/**
 * @file model_core.hpp
 * @brief Domain types of the adhesion model: off-rate laws, time and age
 *        functions, the aligned characteristic grid, parameter validation
 *        and the age-weighted sup norm.
 *
 * All quantities are nondimensional. The age grid is tied to the time grid
 * through da = dt / epsilon so that the transport operator
 * epsilon d/dt + d/da maps grid nodes onto grid nodes.
 */

#include <adhesion/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adhesion {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ============================================================================
// Quadrature on the uniform age grid
// ============================================================================

/// Composite trapezoid rule of term(j), j = 0..n-1, with spacing h.
template <typename Term>
double trapezoid(std::size_t n, double h, Term &&term) {
    if (n < 2) return 0.0;
    double sum = 0.5 * (term(std::size_t{0}) + term(n - 1));
    for (std::size_t j = 1; j + 1 < n; ++j) sum += term(j);
    return sum * h;
}

inline double trapezoid(std::span<const double> values, double h) {
    return trapezoid(values.size(), h, [&](std::size_t j) { return values[j]; });
}

/// Trapezoid weight of node j among n nodes.
inline double trapezoid_weight(std::size_t j, std::size_t n, double h) {
    return (j == 0 || j + 1 == n) ? 0.5 * h : h;
}

// ============================================================================
// Off-rate law
// ============================================================================

enum class OffRateFamily { Constant, Affine, SaturatingLinear, ClippedBell };

/**
 * @brief Parametric off-rate zeta(u), evaluated on |u|.
 *
 *  - Constant:          zeta0
 *  - Affine:            zeta0 + slope |u|
 *  - SaturatingLinear:  zeta0 + slope min(|u|, cap)
 *  - ClippedBell:       zeta0 min(exp|u|, exp(cap))   (exploratory)
 *
 * The convex minorant data (intercept, slope) describe a line
 * intercept + slope u lying below zeta on u >= 0.
 */
struct OffRateSpec {
    OffRateFamily family = OffRateFamily::Constant;
    double zeta0 = 1.0;
    double slope = 0.0;
    double cap = 0.0;

    static OffRateSpec constant(double z0) { return {OffRateFamily::Constant, z0, 0.0, 0.0}; }
    static OffRateSpec affine(double z0, double k) { return {OffRateFamily::Affine, z0, k, 0.0}; }
    static OffRateSpec saturating_linear(double z0, double k, double u_sat) {
        return {OffRateFamily::SaturatingLinear, z0, k, u_sat};
    }
    static OffRateSpec clipped_bell(double z0, double u_cap) {
        return {OffRateFamily::ClippedBell, z0, 0.0, u_cap};
    }

    [[nodiscard]] double operator()(double u) const {
        const double x = std::abs(u);
        switch (family) {
            case OffRateFamily::Constant: return zeta0;
            case OffRateFamily::Affine: return zeta0 + slope * x;
            case OffRateFamily::SaturatingLinear: return zeta0 + slope * std::min(x, cap);
            case OffRateFamily::ClippedBell: return zeta0 * std::exp(std::min(x, cap));
        }
        return zeta0;
    }

    [[nodiscard]] double zeta_min() const { return zeta0; }
    [[nodiscard]] double at_zero() const { return (*this)(0.0); }

    [[nodiscard]] double lipschitz() const {
        switch (family) {
            case OffRateFamily::Constant: return 0.0;
            case OffRateFamily::Affine:
            case OffRateFamily::SaturatingLinear: return slope;
            case OffRateFamily::ClippedBell: return zeta0 * std::exp(cap);
        }
        return 0.0;
    }

    [[nodiscard]] double minorant_intercept() const { return zeta0; }

    // Bounded laws admit no convex minorant with positive slope.
    [[nodiscard]] double minorant_slope() const {
        return family == OffRateFamily::Affine ? slope : 0.0;
    }

    [[nodiscard]] double minorant(double u) const {
        return minorant_intercept() + minorant_slope() * u;
    }

    [[nodiscard]] bool exploratory() const { return family == OffRateFamily::ClippedBell; }

    [[nodiscard]] std::string family_name() const {
        switch (family) {
            case OffRateFamily::Constant: return "constant";
            case OffRateFamily::Affine: return "affine";
            case OffRateFamily::SaturatingLinear: return "saturating-linear";
            case OffRateFamily::ClippedBell: return "clipped-bell";
        }
        return "unknown";
    }

    void validate() const {
        if (!(zeta0 > 0.0) || !std::isfinite(zeta0))
            throw Error(ErrorCode::InvalidParameter, "off-rate zeta0 must be positive");
        if (slope < 0.0 || !std::isfinite(slope))
            throw Error(ErrorCode::InvalidParameter, "off-rate slope must be nonnegative");
        if ((family == OffRateFamily::SaturatingLinear || family == OffRateFamily::ClippedBell) &&
            !(cap >= 0.0 && std::isfinite(cap)))
            throw Error(ErrorCode::InvalidParameter, "off-rate cap must be finite and nonnegative");
    }
};

// ============================================================================
// Time functions: birth rate beta(t) and force f(t)
// ============================================================================

enum class TimeFamily { Constant, Linear, SinusoidClamped, Tabulated };

struct TimeBounds {
    double min = 0.0;
    double max = 0.0;
    double lipschitz = 0.0;      ///< sup |f'| on the interval
    double derivative_min = 0.0; ///< inf f' on the interval
};

/**
 * @brief Named time-function presets with analytically known bounds.
 *
 * Tabulated inputs are piecewise linear and must declare their bounds; the
 * declared values are returned verbatim by bounds().
 */
class TimeFunction {
  public:
    static TimeFunction constant(double c) {
        TimeFunction f;
        f.family_ = TimeFamily::Constant;
        f.c0_ = c;
        return f;
    }

    /// c0 + c1 t
    static TimeFunction linear(double c0, double c1) {
        TimeFunction f;
        f.family_ = TimeFamily::Linear;
        f.c0_ = c0;
        f.c1_ = c1;
        return f;
    }

    /// clamp(offset + amplitude sin(omega t + phase), lo, hi)
    static TimeFunction sinusoid_clamped(double offset, double amplitude, double omega, double phase,
                                         double lo, double hi) {
        TimeFunction f;
        f.family_ = TimeFamily::SinusoidClamped;
        f.c0_ = offset;
        f.c1_ = amplitude;
        f.omega_ = omega;
        f.phase_ = phase;
        f.lo_ = lo;
        f.hi_ = hi;
        return f;
    }

    static TimeFunction tabulated(std::vector<double> times, std::vector<double> values,
                                  TimeBounds declared) {
        if (times.size() < 2 || times.size() != values.size())
            throw Error(ErrorCode::InvalidParameter, "tabulated function needs >= 2 matching nodes");
        if (!std::is_sorted(times.begin(), times.end()) ||
            std::adjacent_find(times.begin(), times.end()) != times.end())
            throw Error(ErrorCode::InvalidParameter, "tabulated times must be strictly increasing");
        TimeFunction f;
        f.family_ = TimeFamily::Tabulated;
        f.times_ = std::move(times);
        f.values_ = std::move(values);
        f.declared_ = declared;
        return f;
    }

    [[nodiscard]] TimeFamily family() const { return family_; }
    [[nodiscard]] double shift() const { return shift_; }
    /// Adds a constant to the function (used for force compatibility).
    void add_shift(double s) { shift_ += s; }

    [[nodiscard]] double value(double t) const { return raw_value(t) + shift_; }

    [[nodiscard]] double derivative(double t) const {
        switch (family_) {
            case TimeFamily::Constant: return 0.0;
            case TimeFamily::Linear: return c1_;
            case TimeFamily::SinusoidClamped: {
                const double u = c0_ + c1_ * std::sin(omega_ * t + phase_);
                if (u <= lo_ || u >= hi_) return 0.0;
                return c1_ * omega_ * std::cos(omega_ * t + phase_);
            }
            case TimeFamily::Tabulated: {
                const std::size_t k = segment(t);
                return (values_[k + 1] - values_[k]) / (times_[k + 1] - times_[k]);
            }
        }
        return 0.0;
    }

    /// Bounds over [0, T].
    [[nodiscard]] TimeBounds bounds(double T) const {
        if (family_ == TimeFamily::Tabulated) {
            TimeBounds b = declared_;
            b.min += shift_;
            b.max += shift_;
            return b;
        }
        const auto pts = breakpoints(T);
        TimeBounds b{kInf, -kInf, 0.0, kInf};
        for (double t : pts) {
            const double v = value(t);
            b.min = std::min(b.min, v);
            b.max = std::max(b.max, v);
        }
        switch (family_) {
            case TimeFamily::Constant:
                b.lipschitz = 0.0;
                b.derivative_min = 0.0;
                break;
            case TimeFamily::Linear:
                b.lipschitz = std::abs(c1_);
                b.derivative_min = c1_;
                break;
            default: {
                // derivative is piecewise (co)sinusoidal; its extrema sit at
                // the interval ends or where omega t + phase = k pi
                b.lipschitz = std::abs(c1_ * omega_);
                double dmin = kInf;
                for (double t : derivative_breakpoints(T)) dmin = std::min(dmin, derivative(t));
                const double umin = c0_ - std::abs(c1_), umax = c0_ + std::abs(c1_);
                if (umin < lo_ || umax > hi_) dmin = std::min(dmin, 0.0);
                b.derivative_min = dmin;
                break;
            }
        }
        return b;
    }

    /// Total variation on [0, t], i.e. the integral of |f'|.
    [[nodiscard]] double total_variation(double t) const {
        if (t <= 0.0) return 0.0;
        if (family_ == TimeFamily::Constant) return 0.0;
        if (family_ == TimeFamily::Linear) return std::abs(c1_) * t;
        const auto pts = breakpoints(t);
        double tv = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            tv += std::abs(raw_value(pts[i + 1]) - raw_value(pts[i]));
        return tv;
    }

    // accessors for serialization
    [[nodiscard]] double c0() const { return c0_; }
    [[nodiscard]] double c1() const { return c1_; }
    [[nodiscard]] double omega() const { return omega_; }
    [[nodiscard]] double phase() const { return phase_; }
    [[nodiscard]] double lo() const { return lo_; }
    [[nodiscard]] double hi() const { return hi_; }
    [[nodiscard]] const std::vector<double> &times() const { return times_; }
    [[nodiscard]] const std::vector<double> &values() const { return values_; }
    [[nodiscard]] const TimeBounds &declared() const { return declared_; }

  private:
    [[nodiscard]] double raw_value(double t) const {
        switch (family_) {
            case TimeFamily::Constant: return c0_;
            case TimeFamily::Linear: return c0_ + c1_ * t;
            case TimeFamily::SinusoidClamped:
                return std::clamp(c0_ + c1_ * std::sin(omega_ * t + phase_), lo_, hi_);
            case TimeFamily::Tabulated: {
                if (t <= times_.front()) return values_.front();
                if (t >= times_.back()) return values_.back();
                const std::size_t k = segment(t);
                const double s = (t - times_[k]) / (times_[k + 1] - times_[k]);
                return values_[k] + s * (values_[k + 1] - values_[k]);
            }
        }
        return 0.0;
    }

    [[nodiscard]] std::size_t segment(double t) const {
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return std::min(k, times_.size() - 2);
    }

    /// Points on [0,T] between which the function is monotone.
    [[nodiscard]] std::vector<double> breakpoints(double T) const {
        std::vector<double> pts{0.0};
        if (family_ == TimeFamily::SinusoidClamped && omega_ != 0.0) {
            add_phase_points(pts, T, std::numbers::pi / 2.0);
        } else if (family_ == TimeFamily::Tabulated) {
            for (double t : times_)
                if (t > 0.0 && t < T) pts.push_back(t);
        }
        pts.push_back(T);
        std::sort(pts.begin(), pts.end());
        return pts;
    }

    [[nodiscard]] std::vector<double> derivative_breakpoints(double T) const {
        std::vector<double> pts{0.0, T};
        if (omega_ != 0.0) add_phase_points(pts, T, 0.0);
        return pts;
    }

    // times in (0,T) where omega t + phase = offset + k pi
    void add_phase_points(std::vector<double> &pts, double T, double offset) const {
        const double lo = std::min(phase_, omega_ * T + phase_);
        const double hi = std::max(phase_, omega_ * T + phase_);
        const double kmin = std::floor((lo - offset) / std::numbers::pi);
        const double kmax = std::ceil((hi - offset) / std::numbers::pi);
        for (double k = kmin; k <= kmax; k += 1.0) {
            const double t = (offset + k * std::numbers::pi - phase_) / omega_;
            if (t > 0.0 && t < T) pts.push_back(t);
        }
    }

    TimeFamily family_ = TimeFamily::Constant;
    double c0_ = 0.0, c1_ = 0.0, omega_ = 0.0, phase_ = 0.0;
    double lo_ = -kInf, hi_ = kInf;
    double shift_ = 0.0;
    std::vector<double> times_, values_;
    TimeBounds declared_{};
};

// ============================================================================
// Age functions: initial density rho_I(a) and elongation v_I(a)
// ============================================================================

enum class AgeFamily { Zero, Constant, Exponential, Linear, Box };

/// Initial-data presets on a >= 0.
struct AgeFunction {
    AgeFamily family = AgeFamily::Zero;
    double c0 = 0.0; ///< amplitude / value / intercept
    double c1 = 0.0; ///< decay rate / slope / box width

    static AgeFunction zero() { return {}; }
    static AgeFunction constant(double c) { return {AgeFamily::Constant, c, 0.0}; }
    /// c exp(-k a)
    static AgeFunction exponential(double c, double k) { return {AgeFamily::Exponential, c, k}; }
    /// c0 + c1 a
    static AgeFunction linear(double c0, double c1) { return {AgeFamily::Linear, c0, c1}; }
    /// c on [0, width], zero beyond
    static AgeFunction box(double c, double width) { return {AgeFamily::Box, c, width}; }

    [[nodiscard]] double operator()(double a) const {
        switch (family) {
            case AgeFamily::Zero: return 0.0;
            case AgeFamily::Constant: return c0;
            case AgeFamily::Exponential: return c0 * std::exp(-c1 * a);
            case AgeFamily::Linear: return c0 + c1 * a;
            case AgeFamily::Box: return a <= c1 ? c0 : 0.0;
        }
        return 0.0;
    }

    /// Exact integral over [0, inf), if finite.
    [[nodiscard]] std::optional<double> exact_mass() const {
        switch (family) {
            case AgeFamily::Zero: return 0.0;
            case AgeFamily::Exponential:
                if (c1 > 0.0) return c0 / c1;
                return c0 == 0.0 ? std::optional<double>(0.0) : std::nullopt;
            case AgeFamily::Box: return c0 * c1;
            case AgeFamily::Constant:
            case AgeFamily::Linear:
                if (c0 == 0.0 && c1 == 0.0) return 0.0;
                return std::nullopt;
        }
        return std::nullopt;
    }

    /// Age beyond which the remaining mass is below tol (infinite if unknown).
    [[nodiscard]] double support_bound(double tol) const {
        switch (family) {
            case AgeFamily::Zero: return 0.0;
            case AgeFamily::Box: return c1;
            case AgeFamily::Exponential:
                if (c0 == 0.0) return 0.0;
                if (c1 <= 0.0) return kInf;
                return std::max(0.0, std::log(std::abs(c0) / (c1 * tol)) / c1);
            case AgeFamily::Constant:
            case AgeFamily::Linear:
                return (c0 == 0.0 && c1 == 0.0) ? 0.0 : kInf;
        }
        return kInf;
    }

    [[nodiscard]] std::string family_name() const {
        switch (family) {
            case AgeFamily::Zero: return "zero";
            case AgeFamily::Constant: return "constant";
            case AgeFamily::Exponential: return "exponential";
            case AgeFamily::Linear: return "linear";
            case AgeFamily::Box: return "box";
        }
        return "unknown";
    }
};

// ============================================================================
// Grid
// ============================================================================

/// Aligned characteristic grid: da * epsilon == dt.
struct Grid {
    double dt = 0.0;
    double da = 0.0;
    double epsilon = 1.0;
    std::size_t n_age = 0;  ///< number of age nodes, a_j = j da
    std::size_t n_time = 0; ///< number of time steps, t_n = n dt

    [[nodiscard]] double age(std::size_t j) const { return static_cast<double>(j) * da; }
    [[nodiscard]] double time(std::size_t n) const { return static_cast<double>(n) * dt; }
    [[nodiscard]] double a_max() const { return n_age == 0 ? 0.0 : age(n_age - 1); }
    [[nodiscard]] double t_end() const { return time(n_time); }
};

inline constexpr double kAlignmentTol = 1e-12;

/**
 * @brief Builds the aligned grid. When an explicit age step is supplied it
 *        must satisfy da * epsilon == dt to within a relative 1e-12.
 */
inline Grid make_grid(double dt, double epsilon, double T, double a_max,
                      std::optional<double> da = std::nullopt) {
    if (!(dt > 0.0) || !(epsilon > 0.0) || !(T > 0.0) || !(a_max > 0.0))
        throw Error(ErrorCode::InvalidParameter, "dt, epsilon, T and a_max must be positive");
    const double aligned = dt / epsilon;
    if (da && std::abs(*da * epsilon - dt) > kAlignmentTol * dt)
        throw Error(ErrorCode::MisalignedGrid, "da * epsilon = " + std::to_string(*da * epsilon) +
                                                   " differs from dt = " + std::to_string(dt));
    Grid g;
    g.dt = dt;
    g.da = aligned;
    g.epsilon = epsilon;
    g.n_age = static_cast<std::size_t>(std::ceil(a_max / aligned - 1e-9)) + 1;
    g.n_time = static_cast<std::size_t>(std::llround(T / dt));
    if (g.n_time == 0) g.n_time = 1;
    return g;
}

// ============================================================================
// Weight and weighted norm
// ============================================================================

/// omega(a) = 1 / (1 + a)
inline double weight(double a) {
    if (a < 0.0) throw Error(ErrorCode::NegativeAge, "weight requested at a = " + std::to_string(a));
    return 1.0 / (1.0 + a);
}

/// max_j |field[j]| omega(a_j): one time slice of the X_T norm.
inline double weighted_sup_norm(std::span<const double> field, const Grid &grid) {
    double m = 0.0;
    for (std::size_t j = 0; j < field.size(); ++j)
        m = std::max(m, std::abs(field[j]) / (1.0 + grid.age(j)));
    return m;
}

// ============================================================================
// Parameters
// ============================================================================

struct GridControls {
    double dt = 1e-3;
    double T = 1.0;
    double a_max = 0.0;               ///< 0 selects the automatic truncation
    std::optional<double> da{};       ///< optional explicit age step (checked)
    double tail_tol = 1e-12;
};

/// Quantities computed once by validate_params.
struct DerivedData {
    bool validated = false;
    Grid grid{};
    double mu0 = 0.0, mu1 = 0.0, mu2 = 0.0; ///< initial moments (trapezoid)
    double beta_min = 0.0, beta_max = 0.0;
    TimeBounds force{};
    double compat_residual = 0.0; ///< f(0) - int rho_I v_I before any shift
    std::vector<std::string> warnings;
};

struct ModelParams {
    double epsilon = 0.1;
    OffRateSpec offrate{};
    TimeFunction beta = TimeFunction::constant(1.0);
    TimeFunction force = TimeFunction::constant(0.0);
    AgeFunction rho_init = AgeFunction::exponential(0.5, 1.0);
    AgeFunction v_init = AgeFunction::zero();
    double mu_cut = 0.1;   ///< lower mass cut-off
    double p_cut = kInf;   ///< tension clamp
    GridControls grid{};
    double dropped_mass_budget = 1e-9;
    bool auto_shift_force = true;
    double compat_tol = 1e-9;

    DerivedData derived{};

    [[nodiscard]] const Grid &mesh() const { return derived.grid; }
};

/// Sampled initial density on the grid.
inline std::vector<double> sample(const AgeFunction &fn, const Grid &grid) {
    std::vector<double> out(grid.n_age);
    for (std::size_t j = 0; j < grid.n_age; ++j) out[j] = fn(grid.age(j));
    return out;
}

/// Automatic age truncation: covers the data support shifted by T/epsilon and
/// makes exp(-zeta_min a_max) fall below the tail tolerance.
inline double default_a_max(const ModelParams &p) {
    const double support = p.rho_init.support_bound(p.grid.tail_tol);
    const double decay = std::log(1.0 / p.grid.tail_tol) / p.offrate.zeta_min();
    return std::max(support + p.grid.T / p.epsilon, decay);
}

/**
 * @brief Checks the model hypotheses and returns a copy with the grid,
 *        initial moments, data bounds and compatibility shift resolved.
 *
 * Re-validating an accepted parameter set is idempotent.
 */
inline ModelParams validate_params(const ModelParams &raw) {
    ModelParams p = raw;
    if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon))
        throw Error(ErrorCode::InvalidParameter, "epsilon must be positive");
    if (!(p.grid.dt > 0.0) || !(p.grid.T > 0.0))
        throw Error(ErrorCode::InvalidParameter, "dt and T must be positive");
    if (!(p.grid.tail_tol > 0.0 && p.grid.tail_tol < 1.0))
        throw Error(ErrorCode::InvalidParameter, "tail_tol must lie in (0,1)");
    if (!(p.mu_cut > 0.0) || !(p.p_cut > 0.0))
        throw Error(ErrorCode::InvalidParameter, "cut-offs must be positive");
    p.offrate.validate();

    const double needed = default_a_max(p);
    if (!std::isfinite(needed))
        throw Error(ErrorCode::InvalidParameter, "initial density has unbounded support");
    double a_max = p.grid.a_max > 0.0 ? p.grid.a_max : needed;
    const double support = p.rho_init.support_bound(p.grid.tail_tol) + p.grid.T / p.epsilon;
    if (a_max < support * (1.0 - 1e-12))
        throw Error(ErrorCode::InvalidParameter,
                    "a_max = " + std::to_string(a_max) + " below data support plus T/epsilon = " +
                        std::to_string(support));
    const Grid grid = make_grid(p.grid.dt, p.epsilon, p.grid.T, a_max, p.grid.da);

    const auto rho = sample(p.rho_init, grid);
    for (double r : rho)
        if (r < 0.0 || !std::isfinite(r))
            throw Error(ErrorCode::NegativeInitialDensity, "initial density must be nonnegative");
    const double mu0 = trapezoid(rho, grid.da);
    if (!(mu0 > 0.0 && mu0 < 1.0))
        throw Error(ErrorCode::InitialMassOutOfRange,
                    "initial mass " + std::to_string(mu0) + " outside (0,1)");

    const TimeBounds bb = p.beta.bounds(p.grid.T);
    if (!(bb.min > 0.0) || bb.min > bb.max)
        throw Error(ErrorCode::BadBirthRateBounds, "need 0 < beta_min <= beta_max, got " +
                                                       std::to_string(bb.min) + ", " +
                                                       std::to_string(bb.max));

    DerivedData d;
    d.validated = true;
    d.grid = grid;
    d.mu0 = mu0;
    d.mu1 = trapezoid(grid.n_age, grid.da, [&](std::size_t j) { return grid.age(j) * rho[j]; });
    d.mu2 = trapezoid(grid.n_age, grid.da,
                      [&](std::size_t j) { return grid.age(j) * grid.age(j) * rho[j]; });
    d.beta_min = bb.min;
    d.beta_max = bb.max;

    // force compatibility f(0) = int rho_I v_I
    const double balance = trapezoid(grid.n_age, grid.da,
                                     [&](std::size_t j) { return rho[j] * p.v_init(grid.age(j)); });
    d.compat_residual = p.force.value(0.0) - balance;
    if (std::abs(d.compat_residual) > p.compat_tol * std::max(1.0, std::abs(balance))) {
        d.warnings.push_back("force incompatible with initial data: f(0) - int rho_I v_I = " +
                             std::to_string(d.compat_residual));
        if (p.auto_shift_force) {
            p.force.add_shift(-d.compat_residual);
            d.warnings.push_back("force shifted by a constant to restore compatibility");
        }
    }
    d.force = p.force.bounds(p.grid.T);
    if (p.offrate.exploratory())
        d.warnings.push_back("clipped-bell off-rate is exploratory: Lipschitz-based checks may fail");
    p.derived = std::move(d);
    return p;
}

inline const ModelParams &require_validated(const ModelParams &p) {
    if (!p.derived.validated)
        throw Error(ErrorCode::InvalidParameter, "parameters must pass validate_params first");
    return p;
}

// ============================================================================
// State
// ============================================================================

/// Fields on the age grid at one time, owned by a single simulation.
struct StateFields {
    double t = 0.0;
    std::vector<double> rho;
    std::vector<double> v;
    double mu0 = 0.0;
    bool torn_off = false;
};

inline StateFields initial_state(const ModelParams &params) {
    const Grid &grid = require_validated(params).mesh();
    StateFields s;
    s.rho = sample(params.rho_init, grid);
    s.v = sample(params.v_init, grid);
    s.mu0 = trapezoid(s.rho, grid.da);
    return s;
}

/// Off-rate evaluated pointwise on an elongation field.
inline std::vector<double> zeta_field(const OffRateSpec &offrate, std::span<const double> v) {
    std::vector<double> z(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) z[j] = offrate(v[j]);
    return z;
}

} // namespace adhesion
