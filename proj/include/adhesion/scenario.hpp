#pragma once

/**
 * @file scenario.hpp
 * @brief JSON configuration, shipped presets, scenario runs with CSV/JSON
 *        artifacts and grid-refinement studies.
 */

#include <adhesion/coupled.hpp>
#include <adhesion/diagnostics.hpp>
#include <adhesion/model_core.hpp>
#include <adhesion/position_delay.hpp>
#include <adhesion/trajectory.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace adhesion {

inline constexpr const char *kConfigSchema = "adhesion-config/1";
inline constexpr const char *kTrajectorySchema = "adhesion-trajectory/1";
inline constexpr const char *kFieldsSchema = "adhesion-fields/1";
inline constexpr const char *kReportSchema = "adhesion-report/1";

enum class Coupling { March, Picard, ZRoute };

inline const char *to_string(Coupling c) {
    switch (c) {
        case Coupling::March: return "march";
        case Coupling::Picard: return "picard";
        case Coupling::ZRoute: return "z_route";
    }
    return "unknown";
}

struct Scenario {
    std::string name;
    ModelParams params;           ///< raw; validated by run_scenario
    Coupling coupling = Coupling::March;
    RhsMode mode{};
    bool p_cut_auto = false;      ///< p_cut = 2 gamma2 / mu_cut
    std::size_t snapshot_stride = 0;
    double mu_detect = 1e-4;
    PicardConfig picard{};
    std::optional<double> gamma0{};
};

// ============================================================================
// Config parsing
// ============================================================================

namespace detail {
using nlohmann::json;

inline double num(const json &j, const char *key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_number())
        throw Error(ErrorCode::ConfigInvalid, std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline double req(const json &j, const char *key) {
    if (!j.contains(key)) throw Error(ErrorCode::ConfigInvalid, std::string("missing '") + key + "'");
    return num(j, key, 0.0);
}

inline std::string str(const json &j, const char *key, const std::string &fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string())
        throw Error(ErrorCode::ConfigInvalid, std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

inline OffRateSpec parse_offrate(const json &j) {
    const std::string f = str(j, "family", "");
    if (f == "constant") return OffRateSpec::constant(req(j, "zeta0"));
    if (f == "affine") return OffRateSpec::affine(req(j, "zeta0"), req(j, "slope"));
    if (f == "saturating-linear")
        return OffRateSpec::saturating_linear(req(j, "zeta0"), req(j, "slope"), req(j, "cap"));
    if (f == "clipped-bell") return OffRateSpec::clipped_bell(req(j, "zeta0"), req(j, "cap"));
    throw Error(ErrorCode::ConfigInvalid, "unknown off-rate family '" + f + "'");
}

inline TimeFunction parse_time(const json &j) {
    const std::string f = str(j, "family", "");
    if (f == "constant") return TimeFunction::constant(req(j, "value"));
    if (f == "linear") return TimeFunction::linear(req(j, "c0"), req(j, "c1"));
    if (f == "sinusoid-clamped")
        return TimeFunction::sinusoid_clamped(req(j, "offset"), req(j, "amplitude"), req(j, "omega"),
                                              num(j, "phase", 0.0), num(j, "lo", -kInf), num(j, "hi", kInf));
    if (f == "tabulated") {
        if (!j.contains("bounds"))
            throw Error(ErrorCode::ConfigInvalid, "tabulated functions must declare 'bounds'");
        const auto &b = j.at("bounds");
        TimeBounds tb{req(b, "min"), req(b, "max"), req(b, "lipschitz"), req(b, "derivative_min")};
        return TimeFunction::tabulated(j.at("times").get<std::vector<double>>(),
                                       j.at("values").get<std::vector<double>>(), tb);
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown time-function family '" + f + "'");
}

inline AgeFunction parse_age(const json &j) {
    const std::string f = str(j, "family", "");
    if (f == "zero") return AgeFunction::zero();
    if (f == "constant") return AgeFunction::constant(req(j, "value"));
    if (f == "exponential") return AgeFunction::exponential(req(j, "c"), req(j, "k"));
    if (f == "linear") return AgeFunction::linear(req(j, "c0"), req(j, "c1"));
    if (f == "box") return AgeFunction::box(req(j, "c"), req(j, "width"));
    throw Error(ErrorCode::ConfigInvalid, "unknown age-function family '" + f + "'");
}

inline RhsVariant parse_variant(const std::string &s) {
    if (s == "full") return RhsVariant::Full;
    if (s == "double_cutoff") return RhsVariant::DoubleCutoff;
    if (s == "simple_cutoff") return RhsVariant::SimpleCutoff;
    throw Error(ErrorCode::ConfigInvalid, "unknown mode '" + s + "'");
}

inline Coupling parse_coupling(const std::string &s) {
    if (s == "march") return Coupling::March;
    if (s == "picard") return Coupling::Picard;
    if (s == "z_route") return Coupling::ZRoute;
    throw Error(ErrorCode::ConfigInvalid, "unknown coupling '" + s + "'");
}
} // namespace detail

/// Parses a configuration document; ConfigInvalid on schema errors.
inline Scenario parse_scenario(const nlohmann::json &j) {
    using namespace detail;
    try {
        if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
        if (str(j, "schema", "") != kConfigSchema)
            throw Error(ErrorCode::ConfigInvalid, std::string("schema must be '") + kConfigSchema + "'");
        Scenario s;
        s.name = str(j, "name", "unnamed");
        ModelParams &p = s.params;
        p.epsilon = req(j, "epsilon");
        p.offrate = parse_offrate(j.at("offrate"));
        p.beta = parse_time(j.at("beta"));
        p.force = parse_time(j.at("force"));
        p.rho_init = parse_age(j.at("rho_init"));
        p.v_init = j.contains("v_init") ? parse_age(j.at("v_init")) : AgeFunction::zero();
        p.dropped_mass_budget = num(j, "dropped_mass_budget", p.dropped_mass_budget);
        if (j.contains("auto_shift_force")) p.auto_shift_force = j.at("auto_shift_force").get<bool>();

        const json grid = j.value("grid", json::object());
        p.grid.dt = req(grid, "dt");
        p.grid.T = req(grid, "T");
        p.grid.a_max = num(grid, "a_max", 0.0);
        if (grid.contains("da")) p.grid.da = num(grid, "da", 0.0);
        p.grid.tail_tol = num(grid, "tail_tol", p.grid.tail_tol);

        const json run = j.value("run", json::object());
        s.coupling = parse_coupling(str(run, "coupling", "march"));
        s.mode.variant = parse_variant(str(run, "mode", "full"));
        s.snapshot_stride = static_cast<std::size_t>(num(run, "snapshot_stride", 0.0));
        s.mu_detect = num(run, "mu_detect", s.mu_detect);

        const json cut = j.value("cutoffs", json::object());
        s.mode.mu_cut = num(cut, "mu_cut", 0.1);
        if (cut.contains("p_cut") && cut.at("p_cut").is_string()) {
            if (cut.at("p_cut").get<std::string>() != "auto")
                throw Error(ErrorCode::ConfigInvalid, "p_cut must be a number or \"auto\"");
            s.p_cut_auto = true;
        } else {
            s.mode.p_cut = num(cut, "p_cut", kInf);
        }
        p.mu_cut = s.mode.mu_cut;
        p.p_cut = s.mode.p_cut;

        if (run.contains("picard")) {
            const auto &pc = run.at("picard");
            s.picard.window = num(pc, "window", s.picard.window);
            s.picard.window_max = num(pc, "window_max", s.picard.window_max);
            s.picard.tol = num(pc, "tol", s.picard.tol);
            s.picard.max_iterations = static_cast<int>(num(pc, "max_iterations", s.picard.max_iterations));
            if (pc.contains("adaptive")) s.picard.adaptive = pc.at("adaptive").get<bool>();
        }
        const json diag = j.value("diagnostics", json::object());
        if (diag.contains("gamma0") && !diag.at("gamma0").is_null()) s.gamma0 = num(diag, "gamma0", 0.0);
        return s;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ConfigInvalid, e.what());
    }
}

// ============================================================================
// Presets
// ============================================================================

inline const std::map<std::string, std::string> &preset_sources() {
    static const std::map<std::string, std::string> presets = {
        {"global_preset", R"({
  "schema": "adhesion-config/1",
  "name": "global_preset",
  "epsilon": 0.1,
  "offrate": {"family": "affine", "zeta0": 1.0, "slope": 1.0},
  "beta": {"family": "constant", "value": 2.0},
  "force": {"family": "constant", "value": 0.0},
  "rho_init": {"family": "exponential", "c": 0.5, "k": 1.0},
  "v_init": {"family": "zero"},
  "grid": {"dt": 0.001, "T": 2.0},
  "run": {"coupling": "march", "mode": "full", "snapshot_stride": 0}
})"},
        {"tearoff_preset", R"({
  "schema": "adhesion-config/1",
  "name": "tearoff_preset",
  "epsilon": 0.1,
  "offrate": {"family": "affine", "zeta0": 1.0, "slope": 1.0},
  "beta": {"family": "constant", "value": 0.5},
  "force": {"family": "linear", "c0": 1.0, "c1": 1.0},
  "rho_init": {"family": "exponential", "c": 0.5, "k": 1.0},
  "v_init": {"family": "linear", "c0": 0.0, "c1": 2.0},
  "grid": {"dt": 0.001, "T": 0.1},
  "run": {"coupling": "march", "mode": "full", "snapshot_stride": 5}
})"},
        {"constant_zeta_oracle", R"({
  "schema": "adhesion-config/1",
  "name": "constant_zeta_oracle",
  "epsilon": 0.1,
  "offrate": {"family": "constant", "zeta0": 1.0},
  "beta": {"family": "constant", "value": 1.0},
  "force": {"family": "linear", "c0": 0.0, "c1": 1.0},
  "rho_init": {"family": "exponential", "c": 0.2, "k": 1.0},
  "v_init": {"family": "zero"},
  "grid": {"dt": 0.001, "T": 0.5},
  "run": {"coupling": "march", "mode": "full", "snapshot_stride": 0}
})"},
        {"picard_contraction_demo", R"({
  "schema": "adhesion-config/1",
  "name": "picard_contraction_demo",
  "epsilon": 0.1,
  "offrate": {"family": "affine", "zeta0": 1.0, "slope": 0.5},
  "beta": {"family": "constant", "value": 1.0},
  "force": {"family": "sinusoid-clamped", "offset": 0.0, "amplitude": 0.3, "omega": 2.0},
  "rho_init": {"family": "exponential", "c": 0.5, "k": 1.0},
  "v_init": {"family": "zero"},
  "cutoffs": {"mu_cut": 0.1, "p_cut": "auto"},
  "grid": {"dt": 0.001, "T": 0.5},
  "run": {"coupling": "picard", "mode": "double_cutoff", "snapshot_stride": 0,
          "picard": {"window": 0.05, "window_max": 0.25, "tol": 1e-10, "max_iterations": 60, "adaptive": true}}
})"},
        {"bell_exploratory", R"({
  "schema": "adhesion-config/1",
  "name": "bell_exploratory",
  "epsilon": 0.1,
  "offrate": {"family": "clipped-bell", "zeta0": 0.5, "cap": 3.0},
  "beta": {"family": "constant", "value": 1.0},
  "force": {"family": "linear", "c0": 0.0, "c1": 0.2},
  "rho_init": {"family": "exponential", "c": 0.5, "k": 1.0},
  "v_init": {"family": "zero"},
  "cutoffs": {"mu_cut": 0.05},
  "grid": {"dt": 0.001, "T": 1.0},
  "run": {"coupling": "march", "mode": "simple_cutoff", "snapshot_stride": 100}
})"},
    };
    return presets;
}

inline std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto &[k, v] : preset_sources()) out.push_back(k);
    return out;
}

/// A preset name or a path to a JSON config file.
inline Scenario load_scenario(const std::string &name_or_path) {
    const auto &presets = preset_sources();
    if (const auto it = presets.find(name_or_path); it != presets.end())
        return parse_scenario(nlohmann::json::parse(it->second));
    std::ifstream in(name_or_path);
    if (!in)
        throw Error(ErrorCode::ConfigNotFound, "no preset or readable config named '" + name_or_path + "'");
    try {
        return parse_scenario(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ConfigInvalid, e.what());
    }
}

/// Overrides dt and/or T, keeping everything else.
inline Scenario with_grid(Scenario s, std::optional<double> dt, std::optional<double> T) {
    if (dt) s.params.grid.dt = *dt;
    if (T) s.params.grid.T = *T;
    return s;
}

// ============================================================================
// Runs
// ============================================================================

struct RunResult {
    ModelParams params;          ///< validated
    RhsMode mode{};
    TrajectoryRecord trajectory;
    std::optional<PicardRun> picard;
    DiagnosticsReport report;
    int exit_code = 0;
    std::string error;
};

/// Validates, resolves p_cut = "auto" and runs the selected coupling.
inline RunResult simulate(const Scenario &sc) {
    RunResult r;
    r.params = validate_params(sc.params);
    r.mode = sc.mode;
    if (sc.p_cut_auto) {
        const auto &grid = r.params.mesh();
        const auto rho = sample(r.params.rho_init, grid);
        const double p0 = trapezoid(grid.n_age, grid.da, [&](std::size_t j) {
            const double v = r.params.v_init(grid.age(j));
            return r.params.offrate(v) * std::abs(v) * rho[j];
        });
        const double g2 = compute_gamma2(r.params, grid.t_end(), p0).gamma2;
        r.mode.p_cut = std::max(2.0 * g2 / r.mode.mu_cut, 1e-12);
        r.params.p_cut = r.mode.p_cut;
    }
    MarchOptions mo;
    mo.mode = r.mode;
    mo.snapshot_stride = sc.snapshot_stride;
    mo.mu_detect = sc.mu_detect;
    switch (sc.coupling) {
        case Coupling::March: r.trajectory = march_coupled(r.params, mo); break;
        case Coupling::ZRoute: r.trajectory = march_z_route(r.params, mo); break;
        case Coupling::Picard: {
            PicardConfig cfg = sc.picard;
            cfg.mode = r.mode;
            r.picard = run_picard(r.params, cfg, sc.snapshot_stride);
            r.trajectory = r.picard->trajectory;
            break;
        }
    }
    r.report = evaluate(r.params, r.trajectory, {r.mode, sc.gamma0});
    if (r.picard) {
        double worst = 0.0;
        for (const auto &w : r.picard->windows)
            for (double x : w.trace.ratios) worst = std::max(worst, x);
        r.report.constants["picard_max_ratio"] = worst;
        r.report.constants["picard_halvings"] = static_cast<double>(r.picard->halvings);
        Check c = make_check("picard_contraction", "iterate difference ratio < 1", 1.0 - worst, 0.0);
        c.pass = worst < 1.0;
        r.report.checks.push_back(c);
    }
    r.exit_code = r.report.all_pass() ? 0 : 2;
    return r;
}

namespace detail {
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline nlohmann::json finite_or_null(double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}
} // namespace detail

/// Column order is fixed by the trajectory schema version.
inline const std::vector<std::string> &trajectory_columns() {
    static const std::vector<std::string> cols = {
        "t",       "mu0",           "mu1",     "mu2",          "rho0",         "dropped_mass",
        "g",       "tension",       "tension_abs", "clamp_active", "mass_cut_active", "rho_v",
        "rho_abs_v", "force",       "force_residual", "force_variation", "xnorm", "min_rho_v",
        "z"};
    return cols;
}

inline void write_trajectory_csv(std::ostream &os, const TrajectoryRecord &traj) {
    using detail::fmt;
    os << "# " << kTrajectorySchema << "\n";
    const auto &cols = trajectory_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto &s : traj.samples) {
        os << fmt(s.t) << ',' << fmt(s.mu0) << ',' << fmt(s.mu1) << ',' << fmt(s.mu2) << ','
           << fmt(s.rho_boundary) << ',' << fmt(s.dropped_mass) << ',' << fmt(s.g) << ','
           << fmt(s.tension) << ',' << fmt(s.tension_abs) << ',' << (s.clamp_active ? 1 : 0) << ','
           << (s.mass_cut_active ? 1 : 0) << ',' << fmt(s.rho_v) << ',' << fmt(s.rho_abs_v) << ','
           << fmt(s.force) << ',' << fmt(std::abs(s.rho_v - s.force)) << ',' << fmt(s.force_variation)
           << ',' << fmt(s.xnorm) << ',' << fmt(s.min_rho_v) << ',' << fmt(s.z) << "\n";
    }
}

inline void write_fields_csv(std::ostream &os, const Snapshot &snap, const Grid &grid) {
    using detail::fmt;
    os << "# " << kFieldsSchema << " t=" << fmt(snap.t) << "\n";
    os << "a,rho,v\n";
    for (std::size_t j = 0; j < snap.rho.size(); ++j)
        os << fmt(grid.age(j)) << ',' << fmt(snap.rho[j]) << ',' << fmt(snap.v[j]) << "\n";
}

inline void write_trace_csv(std::ostream &os, const PicardRun &run) {
    using detail::fmt;
    os << "window,t_start,n_steps,iteration,difference,ratio\n";
    for (const auto &w : run.windows) {
        const auto &d = w.trace.differences;
        for (std::size_t k = 0; k < d.size(); ++k) {
            double ratio = kNaN;
            for (std::size_t i = 0; i < w.trace.ratios.size(); ++i)
                if (w.trace.ratio_iteration[i] == k) ratio = w.trace.ratios[i];
            os << w.index << ',' << fmt(w.t_start) << ',' << w.n_steps << ',' << k + 1 << ','
               << fmt(d[k]) << ',' << fmt(ratio) << "\n";
        }
    }
}

inline nlohmann::json report_json(const Scenario &sc, const RunResult &r) {
    using detail::finite_or_null;
    nlohmann::json j;
    j["schema"] = kReportSchema;
    j["scenario"] = sc.name;
    j["coupling"] = to_string(sc.coupling);
    j["mode"] = to_string(r.mode.variant);
    j["outcome"] = r.error.empty() ? to_string(r.trajectory.outcome) : "error";
    j["exit_code"] = r.exit_code;
    if (!r.error.empty()) {
        j["error"] = r.error;
        return j;
    }
    const Grid &g = r.params.mesh();
    j["grid"] = {{"dt", g.dt}, {"da", g.da}, {"n_age", g.n_age}, {"n_time", g.n_time}, {"a_max", g.a_max()}};
    j["offrate"] = r.params.offrate.family_name();
    j["exploratory"] = r.params.offrate.exploratory();
    j["final_time"] = r.trajectory.final_time();
    j["t_star"] = finite_or_null(r.trajectory.tear_off_time);
    j["regime"] = to_string(r.report.regime);
    j["pass"] = r.report.all_pass();
    auto &checks = j["checks"] = nlohmann::json::array();
    for (const auto &c : r.report.checks)
        checks.push_back({{"check", c.name},
                          {"anchor", c.anchor},
                          {"pass", c.pass},
                          {"margin", finite_or_null(c.margin)},
                          {"tolerance", c.tolerance},
                          {"advisory", c.advisory}});
    auto &consts = j["constants"] = nlohmann::json::object();
    for (const auto &[k, v] : r.report.constants) consts[k] = finite_or_null(v);
    j["notes"] = r.report.notes;
    return j;
}

/**
 * @brief Runs a scenario and writes trajectory.csv, fields_####.csv,
 *        report.json (and trace.csv for Picard runs) into out_dir.
 *        Exit code 0 on pass, 2 on a failed diagnostic, 3 on a solver or
 *        configuration error.
 */
inline RunResult run_scenario(const Scenario &sc, const std::filesystem::path &out_dir) {
    RunResult r;
    try {
        r = simulate(sc);
    } catch (const Error &e) {
        r.exit_code = 3;
        r.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto open = [&](const std::filesystem::path &p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
        return f;
    };
    if (r.error.empty()) {
        {
            auto f = open(out_dir / "trajectory.csv");
            write_trajectory_csv(f, r.trajectory);
        }
        for (std::size_t k = 0; k < r.trajectory.snapshots.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "fields_%04zu.csv", k);
            auto f = open(out_dir / name);
            write_fields_csv(f, r.trajectory.snapshots[k], r.trajectory.grid);
        }
        if (r.picard) {
            auto f = open(out_dir / "trace.csv");
            write_trace_csv(f, *r.picard);
        }
    }
    auto f = open(out_dir / "report.json");
    f << report_json(sc, r).dump(2) << "\n";
    return r;
}

/// Human-readable rendering of a report.json document.
inline std::string report_text(const nlohmann::json &j) {
    std::ostringstream os;
    os << "scenario  " << j.value("scenario", "?") << " (" << j.value("coupling", "?") << ", "
       << j.value("mode", "?") << ")\n";
    os << "outcome   " << j.value("outcome", "?");
    if (j.contains("t_star") && !j["t_star"].is_null()) os << " at t* = " << j["t_star"].get<double>();
    os << "\n";
    if (j.contains("error")) {
        os << "error     " << j["error"].get<std::string>() << "\n";
        return os.str();
    }
    os << "regime    " << j.value("regime", "?") << "\n";
    os << "verdict   " << (j.value("pass", false) ? "PASS" : "FAIL") << "\n\n";
    for (const auto &c : j["checks"]) {
        char line[256];
        const double margin = c["margin"].is_null() ? kNaN : c["margin"].get<double>();
        std::snprintf(line, sizeof line, "  %-5s %-24s margin %+.4e  tol %.2e%s  %s\n",
                      c["pass"].get<bool>() ? "ok" : "FAIL", c["check"].get<std::string>().c_str(),
                      margin, c["tolerance"].get<double>(), c["advisory"].get<bool>() ? " (advisory)" : "",
                      c["anchor"].get<std::string>().c_str());
        os << line;
    }
    os << "\nconstants\n";
    for (const auto &[k, v] : j["constants"].items())
        os << "  " << k << " = " << (v.is_null() ? std::string("inf") : detail::fmt(v.get<double>())) << "\n";
    for (const auto &n : j["notes"]) os << "note: " << n.get<std::string>() << "\n";
    return os.str();
}

// ============================================================================
// Refinement study
// ============================================================================

struct StudyLevel {
    double dt = 0.0;
    double mu0_error = kNaN;       ///< vs closed form (constant off-rate) or the finest level
    double force_residual = kNaN;  ///< max |int rho v - f|, PDE route
    double route_gap = kNaN;       ///< max X-norm gap between z-route and PDE-route v
    double t_star = kNaN;
    double scale = 1.0;            ///< max(1, |f|, X-norm of v) over the run
    std::string error;
};

struct StudyMetric {
    std::string name;
    std::vector<double> errors;
    std::vector<double> orders;  ///< log2(e_k / e_{k+1})
    bool exact = false;          ///< every error at round-off relative to the level scale
};

struct StudyResult {
    std::string scenario;
    bool oracle = false;         ///< mu0 errors measured against the closed form
    std::vector<StudyLevel> levels;
    std::vector<StudyMetric> metrics;
    std::vector<double> t_star_differences;
};

namespace detail {
/// mu0 closed form when zeta and beta are constant.
inline std::optional<std::function<double(double)>> mass_oracle(const ModelParams &p) {
    if (p.offrate.family != OffRateFamily::Constant || p.beta.family() != TimeFamily::Constant)
        return std::nullopt;
    const double z = p.offrate.zeta0, b = p.beta.value(0.0), eps = p.epsilon;
    const double m0 = p.rho_init.exact_mass().value_or(p.derived.mu0);
    const double minf = b / (b + z);
    return [=](double t) { return minf + (m0 - minf) * std::exp(-(b + z) * t / eps); };
}

inline StudyMetric make_metric(std::string name, std::vector<double> e, const std::vector<double> &scale = {}) {
    StudyMetric m{std::move(name), std::move(e), {}, true};
    for (std::size_t k = 0; k < m.errors.size(); ++k) {
        const double s = k < scale.size() ? scale[k] : 1.0;
        if (!(std::abs(m.errors[k]) <= 1e-10 * s)) m.exact = false;
    }
    for (std::size_t k = 0; k + 1 < m.errors.size(); ++k)
        m.orders.push_back(m.errors[k + 1] > 0.0 && m.errors[k] > 0.0 ? std::log2(m.errors[k] / m.errors[k + 1])
                                                                     : kNaN);
    return m;
}
} // namespace detail

/**
 * @brief Reruns the scenario (march coupling) with dt halved per level, one
 *        worker thread per level. InsufficientLevels for levels < 2.
 */
inline StudyResult refinement_study(const Scenario &base, int levels) {
    if (levels < 2) throw Error(ErrorCode::InsufficientLevels, "a refinement study needs at least 2 levels");
    StudyResult out;
    out.scenario = base.name;
    const auto n = static_cast<std::size_t>(levels);
    std::vector<TrajectoryRecord> runs(n);
    std::vector<StudyLevel> lv(n);
    std::vector<ModelParams> params(n);
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < n; ++k) {
        workers.emplace_back([&, k] {
            try {
                Scenario s = base;
                s.params.grid.dt = base.params.grid.dt / std::pow(2.0, static_cast<double>(k));
                params[k] = validate_params(s.params);
                lv[k].dt = params[k].mesh().dt;
                MarchOptions mo;
                mo.mode = s.mode;
                if (s.p_cut_auto) mo.mode.p_cut = kInf;
                mo.mu_detect = s.mu_detect;
                const std::size_t stride = std::max<std::size_t>(1, params[k].mesh().n_time / 20);
                mo.snapshot_stride = stride;
                runs[k] = march_coupled(params[k], mo);
                const auto zr = march_z_route(params[k], mo);
                double fb = 0.0, scale = 1.0;
                for (const auto &smp : runs[k].samples) {
                    fb = std::max(fb, std::abs(smp.rho_v - smp.force));
                    scale = std::max({scale, std::abs(smp.force), std::isfinite(smp.xnorm) ? smp.xnorm : 0.0});
                }
                lv[k].scale = scale;
                lv[k].force_residual = fb;
                double gap = 0.0;
                const std::size_t m = std::min(zr.snapshots.size(), runs[k].snapshots.size());
                for (std::size_t i = 0; i + 1 < m; ++i) {
                    std::vector<double> d(zr.snapshots[i].v.size());
                    for (std::size_t j = 0; j < d.size(); ++j) d[j] = zr.snapshots[i].v[j] - runs[k].snapshots[i].v[j];
                    gap = std::max(gap, weighted_sup_norm(d, params[k].mesh()));
                }
                lv[k].route_gap = gap;
                lv[k].t_star = runs[k].tear_off_time;
            } catch (const Error &e) {
                lv[k].error = std::string(to_string(e.code())) + ": " + e.what();
            }
        });
    }
    for (auto &w : workers) w.join();
    for (const auto &l : lv)
        if (!l.error.empty()) throw Error(ErrorCode::InvalidParameter, "refinement level failed: " + l.error);

    const auto oracle = detail::mass_oracle(params[0]);
    out.oracle = oracle.has_value();
    for (std::size_t k = 0; k < n; ++k) {
        double e = 0.0;
        if (oracle) {
            for (const auto &s : runs[k].samples) e = std::max(e, std::abs(s.mu0 - (*oracle)(s.t)));
        } else if (k + 1 < n) {
            const auto &fine = runs[n - 1].samples;
            const std::size_t ratio = std::size_t{1} << (n - 1 - k);
            for (std::size_t i = 0; i < runs[k].samples.size() && i * ratio < fine.size(); ++i)
                e = std::max(e, std::abs(runs[k].samples[i].mu0 - fine[i * ratio].mu0));
        } else {
            e = kNaN;
        }
        lv[k].mu0_error = e;
    }
    std::vector<double> mu, fb, rg, sc;
    for (const auto &l : lv) {
        sc.push_back(l.scale);
        if (std::isfinite(l.mu0_error)) mu.push_back(l.mu0_error);
        fb.push_back(l.force_residual);
        rg.push_back(l.route_gap);
    }
    out.metrics.push_back(detail::make_metric("mu0", mu));
    out.metrics.push_back(detail::make_metric("force_residual", fb, sc));
    out.metrics.push_back(detail::make_metric("route_gap", rg, sc));
    for (std::size_t k = 0; k + 1 < n; ++k)
        if (std::isfinite(lv[k].t_star) && std::isfinite(lv[k + 1].t_star))
            out.t_star_differences.push_back(std::abs(lv[k + 1].t_star - lv[k].t_star));
    out.levels = std::move(lv);
    return out;
}

inline std::string study_text(const StudyResult &s) {
    std::ostringstream os;
    char line[200];
    os << "refinement study: " << s.scenario << (s.oracle ? " (mu0 vs closed form)" : " (mu0 vs finest level)") << "\n";
    std::snprintf(line, sizeof line, "%12s %14s %14s %14s %14s\n", "dt", "mu0_error", "force_resid", "route_gap", "t_star");
    os << line;
    for (const auto &l : s.levels) {
        std::snprintf(line, sizeof line, "%12.4e %14.6e %14.6e %14.6e %14.8f\n", l.dt, l.mu0_error, l.force_residual,
                      l.route_gap, l.t_star);
        os << line;
    }
    for (const auto &m : s.metrics) {
        os << "order " << m.name << ":";
        if (m.exact) {
            os << " exact\n";
            continue;
        }
        for (double o : m.orders) {
            std::snprintf(line, sizeof line, " %.3f", o);
            os << line;
        }
        os << "\n";
    }
    if (!s.t_star_differences.empty()) {
        os << "t* differences:";
        for (double d : s.t_star_differences) {
            std::snprintf(line, sizeof line, " %.3e", d);
            os << line;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace adhesion
