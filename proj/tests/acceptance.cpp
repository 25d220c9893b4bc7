// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <adhesion/scenario.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

using namespace adhesion;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char *name, bool pass, const std::string &detail) {
    if (!pass) ++failures;
    std::printf("%s %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
}

std::string format(const char *fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

double scalar_mass(double m0, double beta, double zeta, double eps, double t) {
    const double minf = beta / (beta + zeta);
    return minf + (m0 - minf) * std::exp(-(beta + zeta) * t / eps);
}

double xgap(const Snapshot &a, const Snapshot &b, const Grid &grid) {
    std::vector<double> d(a.v.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = a.v[j] - b.v[j];
    return weighted_sup_norm(d, grid);
}

// --------------------------------------------------------------------------

void constant_rate_mass() {
    const Scenario base = load_scenario("constant_zeta_oracle");
    const double eps = base.params.epsilon;
    std::vector<double> errs, dts, secs;
    bool bounded = true;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        const auto t0 = Clock::now();
        const ModelParams p = validate_params(with_grid(base, dt, 5.0 * eps).params);
        const auto traj = march_coupled(p, {});
        const double beta = p.beta.value(0.0), zeta = p.offrate.zeta0;
        const double m0 = *p.rho_init.exact_mass();
        double e = 0.0;
        for (const auto &s : traj.samples) e = std::max(e, std::abs(s.mu0 - scalar_mass(m0, beta, zeta, eps, s.t)));
        secs.push_back(seconds_since(t0));
        errs.push_back(e);
        dts.push_back(dt);
        bounded = bounded && e <= 3.0 * dt;
    }
    bool halves = true;
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) halves = halves && std::abs(errs[k] / errs[k + 1] - 2.0) <= 0.6;
    const double slowest = *std::max_element(secs.begin(), secs.end());
    report(1, "constant-rate mass oracle", bounded && halves && slowest < 1.0,
           format("err/dt = %.3f %.3f %.3f (<= 3), ratios %.3f %.3f, slowest level %.2fs", errs[0] / dts[0],
                  errs[1] / dts[1], errs[2] / dts[2], errs[0] / errs[1], errs[1] / errs[2], slowest));
}

void characteristics_oracle() {
    const auto t0 = Clock::now();
    const Scenario base = load_scenario("constant_zeta_oracle");
    const ModelParams p = validate_params(base.params);
    MarchOptions mo;
    mo.snapshot_stride = 50;
    const auto traj = march_coupled(p, mo);
    const double beta = p.beta.value(0.0), zeta = p.offrate.zeta0, eps = p.epsilon;
    const double m0 = *p.rho_init.exact_mass();
    TimeSeries hist;
    for (const auto &s : traj.samples) {
        hist.t.push_back(s.t);
        hist.value.push_back(scalar_mass(m0, beta, zeta, eps, s.t));
    }
    const SpaceTimeFunction z = [=](double, double) { return zeta; };
    const Grid &g = traj.grid;
    double err = 0.0;
    for (const auto &snap : traj.snapshots)
        for (std::size_t j = 0; j < g.n_age; ++j)
            err = std::max(err, std::abs(snap.rho[j] - rho_closed_form(p, hist, z, snap.t, g.age(j), 2)));
    const double secs = seconds_since(t0);
    report(2, "characteristics oracle", err <= 5.0 * g.dt && secs < 1.0,
           format("max |rho - closed form| = %.3e (<= %.1e) over %zu slices, %.2fs", err, 5.0 * g.dt,
                  traj.snapshots.size(), secs));
}

void invariant_suite() {
    const auto t0 = Clock::now();
    const std::vector<std::string> names = preset_names();
    const std::vector<double> factors{2.0, 1.0, 0.5};
    const std::vector<std::string> checks{"density_nonnegative", "mass_below_one", "moment1_bound",
                                          "moment2_bound", "boundary_elongation", "apriori_estimate"};
    struct Cell {
        std::string name;
        double dt = 0.0;
        std::vector<std::string> violations;
    };
    std::vector<Cell> cells;
    for (const auto &n : names)
        for (double f : factors) cells.push_back({n, load_scenario(n).params.grid.dt * f, {}});
    std::vector<std::thread> workers;
    for (auto &cell : cells)
        workers.emplace_back([&cell, &checks] {
            try {
                const auto r = simulate(with_grid(load_scenario(cell.name), cell.dt, std::nullopt));
                for (const auto &c : checks) {
                    const Check *k = r.report.find(c);
                    if (!k || !k->pass) cell.violations.push_back(c);
                }
            } catch (const Error &e) {
                cell.violations.push_back(std::string(to_string(e.code())));
            }
        });
    for (auto &w : workers) w.join();
    std::size_t bad = 0;
    std::string first;
    for (const auto &c : cells) {
        bad += c.violations.size();
        if (!c.violations.empty() && first.empty())
            first = format(", first: %s dt=%g %s", c.name.c_str(), c.dt, c.violations.front().c_str());
    }
    const double secs = seconds_since(t0);
    report(3, "invariant suite", bad == 0 && secs < 30.0,
           format("%zu presets x %zu levels, %zu violations%s, %.2fs", names.size(), factors.size(), bad,
                  first.c_str(), secs));
}

void force_balance() {
    const Scenario base = load_scenario("tearoff_preset");
    std::vector<double> C, gapC;
    double z_resid = 0.0;
    bool roundoff = true, gap_ok = true;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        const ModelParams p = validate_params(with_grid(base, dt, std::nullopt).params);
        MarchOptions mo;
        mo.snapshot_stride = std::max<std::size_t>(1, p.mesh().n_time / 20);
        const auto pde = march_coupled(p, mo);
        const auto zr = march_z_route(p, mo);
        double res = 0.0, scale = 1.0;
        for (const auto &s : pde.samples) {
            res = std::max(res, std::abs(s.rho_v - s.force));
            scale = std::max(scale, std::abs(s.force));
        }
        for (const auto &s : zr.samples) z_resid = std::max(z_resid, std::abs(s.rho_v - s.force) / scale);
        roundoff = roundoff && res <= 1e-10 * scale;
        C.push_back(res / dt);
        double gap = 0.0, vscale = 1.0;
        const std::size_t m = std::min(pde.snapshots.size(), zr.snapshots.size());
        for (std::size_t i = 0; i < m; ++i) {
            gap = std::max(gap, xgap(zr.snapshots[i], pde.snapshots[i], p.mesh()));
            vscale = std::max(vscale, weighted_sup_norm(pde.snapshots[i].v, p.mesh()));
        }
        gapC.push_back(gap / dt);
        gap_ok = gap_ok && gap <= 5.0 * dt * vscale;
    }
    const double cmin = *std::min_element(C.begin(), C.end()), cmax = *std::max_element(C.begin(), C.end());
    const bool stable = roundoff || cmax <= 2.0 * cmin;
    const bool z_ok = z_resid <= 1e-10;
    report(4, "force balance / routes", stable && z_ok && gap_ok,
           format("C = %.2e %.2e %.2e, z-route residual %.1e, gap/dt = %.2e %.2e %.2e", C[0], C[1], C[2], z_resid,
                  gapC[0], gapC[1], gapC[2]));
}

RunResult picard_demo() {
    Scenario sc = load_scenario("picard_contraction_demo");
    sc.snapshot_stride = 50;
    return simulate(sc);
}

void picard_contraction(const RunResult &r) {
    double worst = 0.0;
    std::size_t n_ratios = 0;
    for (const auto &w : r.picard->windows)
        for (double x : w.trace.ratios) {
            worst = std::max(worst, x);
            ++n_ratios;
        }
    MarchOptions mo;
    mo.mode = r.mode;
    mo.snapshot_stride = 50;
    const auto march = march_coupled(r.params, mo);
    const auto &pic = r.trajectory;
    const double dt = r.params.mesh().dt;
    double mu_gap = 0.0, v_gap = 0.0, scale = 1.0;
    for (std::size_t k = 0; k < std::min(pic.samples.size(), march.samples.size()); ++k) {
        mu_gap = std::max(mu_gap, std::abs(pic.samples[k].mu0 - march.samples[k].mu0));
        scale = std::max(scale, march.samples[k].xnorm);
    }
    for (std::size_t i = 0; i < std::min(pic.snapshots.size(), march.snapshots.size()); ++i)
        v_gap = std::max(v_gap, xgap(pic.snapshots[i], march.snapshots[i], r.params.mesh()));
    const bool same_len = pic.samples.size() == march.samples.size();
    report(5, "Picard contraction", n_ratios > 0 && worst < 1.0 && same_len && mu_gap <= dt && v_gap <= dt * scale,
           format("%zu windows, %zu ratios, max %.3f, halvings %zu, |mu0 gap| %.1e, X gap %.1e (<= %.0e)",
                  r.picard->windows.size(), n_ratios, worst, r.picard->halvings, mu_gap, v_gap, dt * scale));
}

void clamp_inactive(const RunResult &r) {
    const double gamma2 = r.report.constants.at("gamma2");
    const double threshold = gamma2 / r.mode.mu_cut;
    std::size_t fired = 0;
    for (std::size_t k = 0; k + 1 < r.trajectory.samples.size(); ++k) fired += r.trajectory.samples[k].clamp_active;
    report(6, "clamp inactive", r.mode.p_cut > threshold && fired == 0,
           format("p_cut %.4g > gamma2/mu_cut %.4g, clamp fired %zu times over [0, %g]", r.mode.p_cut, threshold, fired,
                  r.trajectory.final_time()));
}

void global_regime() {
    const auto t0 = Clock::now();
    const Scenario sc = load_scenario("global_preset");
    const double T = 20.0 * sc.params.epsilon;
    const auto r = simulate(with_grid(sc, std::nullopt, T));
    const double mu_min = r.report.constants.count("mu_min_global") ? r.report.constants.at("mu_min_global") : kNaN;
    double low = kInf;
    for (const auto &s : r.trajectory.samples) low = std::min(low, s.mu0);
    const double secs = seconds_since(t0);
    const bool ok = r.report.regime == Regime::Global && r.trajectory.outcome == Outcome::Completed &&
                    std::abs(r.trajectory.final_time() - T) < 1e-9 && low >= mu_min && secs < 5.0;
    report(7, "global regime", ok,
           format("zeta_breve %.3g < beta_min, T = %g, min mu0 %.6f >= mu_min %.6f, %.2fs",
                  r.report.constants.at("zeta_breve"), r.trajectory.final_time(), low, mu_min, secs));
}

void tearoff_regime() {
    const auto t0c = Clock::now();
    const auto r = simulate(load_scenario("tearoff_preset"));
    const ModelParams &p = r.params;
    const double dt = p.mesh().dt, mu0 = p.derived.mu0;
    // eps/(beta + zc) ln(1 + mu0 (beta + zc)/(zc' f_min - beta)) with zc = zc' = 1, f_min = f(0)
    const double t0 = p.epsilon / 1.5 * std::log(1.0 + mu0 * 1.5 / (p.force.value(0.0) - 0.5));
    double sign = kInf, env = kInf;
    for (const auto &s : r.trajectory.samples) {
        sign = std::min(sign, s.min_rho_v);
        env = std::min(env, (1.0 - s.t / t0) * mu0 + 5.0 * dt - s.mu0);
    }
    for (const auto &snap : r.trajectory.snapshots)
        for (std::size_t j = 0; j < snap.v.size(); ++j) sign = std::min(sign, snap.rho[j] * snap.v[j]);
    const double t_star = r.trajectory.tear_off_time;
    const bool detected = r.trajectory.outcome == Outcome::TearOff && t_star <= t0 * 1.05 + 2.0 * dt;
    const Check *prof = r.report.find("tearoff_profile");
    const double secs = seconds_since(t0c);
    const bool ok = std::abs(t0 - 0.0611) < 5e-4 && sign >= 0.0 && env >= 0.0 && detected && prof && prof->pass &&
                    secs < 5.0;
    report(8, "tear-off regime", ok,
           format("t0 %.5f, t* %.5f, min rho v %.2e, envelope margin %.2e, profile margin %.2e, %.2fs", t0, t_star,
                  sign, env, prof ? prof->margin : kNaN, secs));
}

void stability_functionals() {
    const Scenario sc = load_scenario("global_preset");
    const SpaceTimeFunction w1 = [](double, double) { return 0.0; };
    const SpaceTimeFunction w2 = [](double, double) { return 0.1; };
    bool ok = true;
    std::string detail;
    for (double dt : {1e-3, 5e-4}) {
        const ModelParams p = validate_params(with_grid(sc, dt, 0.5).params);
        const auto s = stability_pair_check(p, w1, w2);
        ok = ok && s.max_value[0] > 0.0 && s.worst_margin[0] >= 0.0 && s.worst_margin[1] >= 0.0;
        detail += format("dt %g: H0 max %.3e margin %.3e, H1 max %.3e margin %.3e; ", dt, s.max_value[0],
                         s.worst_margin[0], s.max_value[1], s.worst_margin[1]);
    }
    detail.resize(detail.size() - 2);
    report(9, "stability functionals", ok, detail);
}

void riccati_utility() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20261016);
    std::uniform_real_distribution<double> A(0.1, 5.0), B(-5.0, 5.0), C(0.0, 5.0), Y(0.01, 10.0);
    const double eps = 0.1, h = 1e-4;
    const int steps = static_cast<int>(std::llround(10.0 * eps / h));
    double worst = -kInf;
    for (int trial = 0; trial < 100; ++trial) {
        const double a = A(rng), b = B(rng), c = C(rng), y0 = Y(rng);
        const double bound = riccati_bound(a, b, c, y0);
        const auto f = [&](double y) { return (-a * y * y + b * y + c) / eps; };
        double y = y0;
        for (int n = 0; n < steps; ++n) {
            const double k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            worst = std::max(worst, y - bound);
        }
    }
    const double secs = seconds_since(t0);
    report(10, "Riccati utility", worst <= 1e-6 && secs < 2.0,
           format("100 tuples, max y - bound = %.3e (<= 1e-6), %.2fs", worst, secs));
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void determinism() {
    const fs::path root = fs::temp_directory_path() / "adhesion_acceptance_determinism";
    fs::remove_all(root);
    const Scenario sc = load_scenario("tearoff_preset");
    run_scenario(sc, root / "a");
    run_scenario(sc, root / "b");
    bool same = true;
    std::size_t files = 0;
    for (const auto &e : fs::directory_iterator(root / "a")) {
        ++files;
        same = same && slurp(e.path()) == slurp(root / "b" / e.path().filename());
    }
    const bool have = fs::exists(root / "a" / "trajectory.csv") && fs::exists(root / "a" / "report.json");
    fs::remove_all(root);
    report(11, "determinism", same && have, format("%zu artifacts compared byte for byte", files));
}

} // namespace

int main() {
    const auto start = Clock::now();
    constant_rate_mass();
    characteristics_oracle();
    invariant_suite();
    force_balance();
    const RunResult demo = picard_demo();
    picard_contraction(demo);
    clamp_inactive(demo);
    global_regime();
    tearoff_regime();
    stability_functionals();
    riccati_utility();
    determinism();
    std::printf("%d of 11 criteria failed, %.1fs\n", failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}
