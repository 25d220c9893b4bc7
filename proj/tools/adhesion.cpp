#include <adhesion/scenario.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace adhesion;

namespace {

Coupling coupling_from(const std::string &s) {
    if (s == "march") return Coupling::March;
    if (s == "picard") return Coupling::Picard;
    return Coupling::ZRoute;
}

int cmd_run(const std::string &scenario, std::optional<double> dt, std::optional<double> T,
            const std::string &mode, const std::string &out) {
    Scenario sc;
    try {
        sc = load_scenario(scenario);
    } catch (const Error &e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
        return 3;
    }
    sc = with_grid(std::move(sc), dt, T);
    if (!mode.empty()) {
        sc.coupling = coupling_from(mode);
        if (sc.coupling == Coupling::Picard && sc.mode.variant == RhsVariant::Full) {
            std::cerr << "picard coupling needs a cut-off mode; using double_cutoff\n";
            sc.mode.variant = RhsVariant::DoubleCutoff;
            sc.p_cut_auto = !std::isfinite(sc.mode.p_cut);
        }
    }
    const fs::path dir = out.empty() ? fs::path("out") / sc.name : fs::path(out);
    RunResult r;
    try {
        r = run_scenario(sc, dir);
    } catch (const Error &e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
        return 3;
    }
    std::cout << report_text(report_json(sc, r));
    std::cout << "artifacts in " << dir.string() << "\n";
    return r.exit_code;
}

int cmd_study(const std::string &scenario, int levels, std::optional<double> dt, std::optional<double> T,
              const std::string &out) {
    try {
        const Scenario sc = with_grid(load_scenario(scenario), dt, T);
        const StudyResult s = refinement_study(sc, levels);
        const std::string text = study_text(s);
        std::cout << text;
        if (!out.empty()) {
            fs::create_directories(out);
            std::ofstream f(fs::path(out) / "study.txt");
            f << text;
        }
        return 0;
    } catch (const Error &e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
        return 3;
    }
}

int cmd_report(const std::string &path, const std::string &format) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "report.json";
    std::ifstream in(p);
    if (!in) {
        std::cerr << "ConfigNotFound: cannot read " << p.string() << "\n";
        return 3;
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "ConfigInvalid: " << e.what() << "\n";
        return 3;
    }
    if (format == "json")
        std::cout << j.dump(2) << "\n";
    else
        std::cout << report_text(j);
    return j.value("exit_code", 3);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Age-structured adhesion simulator and bound checker"};
    app.require_subcommand(1);

    std::string scenario = "global_preset", mode, out;
    std::optional<double> dt, T;
    auto *run = app.add_subcommand("run", "run a preset or config file and check it");
    run->add_option("--scenario", scenario, "preset name or path to a JSON config")->required();
    run->add_option("--dt", dt, "time step (da = dt / epsilon)");
    run->add_option("--T", T, "final time");
    run->add_option("--mode", mode, "coupling")->check(CLI::IsMember({"march", "picard", "z_route"}));
    run->add_option("--out", out, "output directory (default out/<scenario>)");

    int levels = 4;
    std::string study_scenario = "constant_zeta_oracle";
    auto *study = app.add_subcommand("study", "grid-refinement study with dt halved per level");
    study->add_option("--levels", levels, "number of levels (>= 2)");
    study->add_option("--scenario", study_scenario, "preset name or path to a JSON config");
    study->add_option("--dt", dt, "coarsest time step");
    study->add_option("--T", T, "final time");
    study->add_option("--out", out, "directory for study.txt");

    std::string format = "text", report_path = "out/global_preset";
    auto *report = app.add_subcommand("report", "print a stored report");
    report->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    report->add_option("--out", report_path, "run directory or report.json path");

    std::string show;
    auto *presets = app.add_subcommand("presets", "list shipped presets or print one as JSON");
    presets->add_option("--show", show, "preset to print");

    CLI11_PARSE(app, argc, argv);

    if (*run) return cmd_run(scenario, dt, T, mode, out);
    if (*study) return cmd_study(study_scenario, levels, dt, T, out);
    if (*report) return cmd_report(report_path, format);
    if (*presets) {
        if (show.empty()) {
            for (const auto &n : preset_names()) std::cout << n << "\n";
            return 0;
        }
        const auto &src = preset_sources();
        const auto it = src.find(show);
        if (it == src.end()) {
            std::cerr << "ConfigNotFound: no preset '" << show << "'\n";
            return 3;
        }
        std::cout << it->second << "\n";
    }
    return 0;
}
