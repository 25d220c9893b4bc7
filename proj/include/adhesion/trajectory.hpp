#pragma once

/**
 * @file trajectory.hpp
 * @brief Time series of scalar observables and optional field snapshots.
 */

#include <adhesion/model_core.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace adhesion {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Scalar observables at one time level.
struct Sample {
    double t = 0.0;
    double mu0 = 0.0, mu1 = 0.0, mu2 = 0.0;
    double rho_boundary = 0.0;   ///< rho(t, 0)
    double dropped_mass = 0.0;   ///< cumulative mass lost past a_max
    double g = 0.0;              ///< elongation source applied on the step leaving t
    double tension = 0.0;        ///< signed  int zeta(v) v rho
    double tension_abs = 0.0;    ///< p(t) = int zeta(v) |v| rho
    double rho_v = 0.0;          ///< int rho v
    double rho_abs_v = 0.0;      ///< int rho |v|
    double force = 0.0;          ///< f(t)
    double force_variation = 0.0;///< int_0^t |f'|
    double xnorm = 0.0;          ///< ||v(t) omega||_inf
    double min_rho_v = 0.0;      ///< min_a rho v
    double v_boundary = 0.0;     ///< v(t, 0)
    double min_rho = 0.0;
    double z = kNaN;             ///< binding-site position (z-route only)
    bool clamp_active = false;   ///< tension clamp changed g on the step
    bool mass_cut_active = false;///< mass cut-off changed g on the step
};

struct Snapshot {
    double t = 0.0;
    std::vector<double> rho;
    std::vector<double> v;
};

enum class Outcome { Completed, TearOff, Failed };

inline const char *to_string(Outcome o) {
    switch (o) {
        case Outcome::Completed: return "completed";
        case Outcome::TearOff: return "tear-off";
        case Outcome::Failed: return "failed";
    }
    return "unknown";
}

struct TrajectoryRecord {
    Grid grid{};
    std::vector<Sample> samples;
    std::vector<Snapshot> snapshots;
    Outcome outcome = Outcome::Completed;
    double tear_off_time = kNaN; ///< back-interpolated t* when outcome is TearOff
    double detection_threshold = 0.0;
    std::string error;

    [[nodiscard]] double final_time() const { return samples.empty() ? 0.0 : samples.back().t; }

    /// sup of |g| over the steps actually taken (the last sample's g is never applied)
    [[nodiscard]] double g_sup() const {
        double m = 0.0;
        for (std::size_t k = 0; k + 1 < samples.size(); ++k) m = std::max(m, std::abs(samples[k].g));
        return m;
    }

    [[nodiscard]] double xnorm_sup() const {
        double m = 0.0;
        for (const auto &s : samples) m = std::max(m, s.xnorm);
        return m;
    }
};

} // namespace adhesion
