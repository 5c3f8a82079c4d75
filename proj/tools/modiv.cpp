// modiv command line front end: run the built-in experiment plans, export
// crosstalk matrices, convert BER curves into distance-gain tables, and
// validate plan configurations.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "modiv/channel.hpp"
#include "modiv/experiments.hpp"
#include "modiv/link.hpp"
#include "modiv/turbulence.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string plan_name;
    std::string config_path;
    std::string out_dir = "modiv-out";
    int threads = 0;
    bool full_scale = false;
    modiv::PlanOverrides flags;
};

/// Output directory resolution: the MODIV_OUT_DIR environment variable
/// overrides both the flag and the default.
fs::path resolve_out_dir(const std::string& from_flag) {
    if (const char* env = std::getenv("MODIV_OUT_DIR"); env && *env) return fs::path(env);
    return fs::path(from_flag);
}

int effective_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 4;
}

modiv::ExperimentPlan build_plan(const CommonOptions& options) {
    std::string name = options.plan_name;
    bool full_scale = options.full_scale;
    modiv::PlanOverrides file_overrides;
    if (!options.config_path.empty()) {
        file_overrides = modiv::parse_config_file(options.config_path);
        if (file_overrides.plan && name.empty()) name = *file_overrides.plan;
        if (file_overrides.full_scale) full_scale = *file_overrides.full_scale;
    }
    if (name.empty()) throw std::runtime_error("no plan named (argument or config file)");
    auto plan = modiv::builtin_plan(name, full_scale);
    modiv::apply_overrides(plan, file_overrides);
    modiv::apply_overrides(plan, options.flags);  // flags win over the file
    return plan;
}

void add_override_flags(CLI::App* cmd, CommonOptions& options) {
    cmd->add_option("--config", options.config_path, "key = value config file");
    cmd->add_option("--bits", options.flags.bits_per_screen, "bits per screen");
    cmd->add_option("--screens", options.flags.screens, "screens per sweep point");
    cmd->add_option("--seed", options.flags.seed, "master seed");
    cmd->add_option("--noise", options.flags.noise_sigma, "AWGN sigma, detected-power units");
    cmd->add_option("--threshold", options.flags.threshold,
                    "decision threshold as a fraction of the unfaded one-level");
    cmd->add_option("--waist", options.flags.waist, "beam waist w0 [m]");
    cmd->add_option("--grid-samples", options.flags.grid_samples, "grid samples per axis");
    cmd->add_option("--grid-extent", options.flags.grid_extent, "grid window size [m]");
    cmd->add_option("--subharmonics", options.flags.subharmonics, "subharmonic levels");
    cmd->add_option("--combine", options.flags.combine, "incoherent | coherent");
    cmd->add_flag("--full-scale", options.full_scale,
                  "published-scale run: 1e6 bits x 1024 screens, adds the 0.1 mm point");
    cmd->add_option("--out", options.out_dir, "output directory (MODIV_OUT_DIR overrides)");
    cmd->add_option("--threads", options.threads, "worker threads (default: hardware)");
}

int run_command(const CommonOptions& options) {
    auto plan = build_plan(options);
    const fs::path out_dir = resolve_out_dir(options.out_dir);
    const int threads = effective_threads(options.threads);
    std::printf("running plan %s: %d screens x %d bits, %zu sweep points, %d threads\n",
                plan.name.c_str(), plan.link.n_screens, plan.link.bits_per_screen,
                plan.r0_sweep.size(), threads);
    const auto result = modiv::run_sweep(plan, threads);

    std::printf("%8s %8s", "r0_mm", "SR");
    for (const auto& label : result.arm_labels) std::printf(" %12s", label.c_str());
    std::printf(" %12s\n", result.combiner_label.c_str());
    for (const auto& point : result.points) {
        std::printf("%8.2f %8.3f", point.ber.r0 * 1e3, point.strehl);
        for (std::size_t a = 0; a < result.arm_labels.size(); ++a)
            std::printf(" %12s",
                        modiv::display_ber(point.ber.ber_per_arm[a], point.ber.bits_tested)
                            .c_str());
        std::printf(" %12s\n",
                    modiv::display_ber(point.ber.ber_diversity, point.ber.bits_tested).c_str());
    }

    for (const auto& path : modiv::write_sweep_outputs(result, out_dir))
        std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int crosstalk_command(const CommonOptions& options, double r0_mm, int n_screens) {
    auto plan = build_plan(options);
    const fs::path out_dir = resolve_out_dir(options.out_dir);
    const int threads = effective_threads(options.threads);
    const std::vector<modiv::ModeSpec> modes = {plan.mode_pair.first, plan.mode_pair.second};

    // quasi-clean reference matrix plus the turbulent one
    auto params = plan.link.turbulence;
    params.r0 = 1000.0 * params.grid.physical_extent;
    const auto clean = modiv::crosstalk_matrix(modes, params, 1, plan.link.master_seed, threads);
    params.r0 = r0_mm * 1e-3;
    const auto turbid =
        modiv::crosstalk_matrix(modes, params, n_screens, plan.link.master_seed, threads);

    fs::create_directories(out_dir);
    const auto clean_path = out_dir / (plan.name + "_crosstalk_clean.csv");
    const auto turbid_path = out_dir / (plan.name + "_crosstalk.csv");
    modiv::write_crosstalk_csv(clean_path, clean);
    modiv::write_crosstalk_csv(turbid_path, turbid);

    const double sr = modiv::strehl_estimate(plan.beam_diameter(), r0_mm * 1e-3);
    std::printf("crosstalk at r0 = %.2f mm (SR ~ %.2f), %d screens\n", r0_mm, sr, n_screens);
    std::ostringstream shown;
    modiv::write_crosstalk_csv(shown, turbid);
    std::fputs(shown.str().c_str(), stdout);
    std::printf("wrote %s\nwrote %s\n", clean_path.string().c_str(),
                turbid_path.string().c_str());
    return 0;
}

/// Reads one column of a sweep summary CSV (r0 stored in millimetres).
modiv::BerSeries read_series(const fs::path& csv_path, const std::string& column) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + csv_path.string());
    std::vector<std::string> headers;
    {
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) headers.push_back(cell);
    }
    int column_index = -1;
    for (std::size_t i = 0; i < headers.size(); ++i)
        if (headers[i] == column) column_index = static_cast<int>(i);
    if (column_index < 0)
        throw std::runtime_error("column '" + column + "' not found in " + csv_path.string());

    modiv::BerSeries series;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        series.r0.push_back(std::stod(cells.at(0)) * 1e-3);
        series.ber.push_back(std::stod(cells.at(static_cast<std::size_t>(column_index))));
    }
    return series;
}

int distances_command(const std::string& csv, double cn2, double wavelength,
                      const std::vector<double>& bers, const std::string& siso_column,
                      const std::string& egc_column, const std::string& out_flag) {
    const auto siso = read_series(csv, siso_column);
    const auto diversity = read_series(csv, egc_column);
    const modiv::AtmosphereModel atmosphere(cn2, wavelength);
    const auto table = modiv::distance_gain_table(siso, diversity, bers, atmosphere);

    std::printf("%10s %12s %12s %12s %12s %8s\n", "target_ber", "r0_siso_mm", "r0_div_mm",
                "z_siso_km", "z_div_km", "gain_%");
    for (const auto& row : table) {
        if (!row.achievable) {
            std::printf("%10.4g %s\n", row.target_ber,
                        "  not achievable within the measured curve");
            continue;
        }
        std::printf("%10.4g %12.3f %12.3f %12.3f %12.3f %8.1f\n", row.target_ber,
                    row.r0_siso * 1e3, row.r0_diversity * 1e3, row.z_siso * 1e-3,
                    row.z_diversity * 1e-3, row.gain_percent);
    }

    const fs::path out_dir = resolve_out_dir(out_flag);
    fs::create_directories(out_dir);
    const auto out_path = out_dir / "distance_gains.csv";
    std::ofstream(out_path) << modiv::to_distance_csv(table);
    std::printf("wrote %s\n", out_path.string().c_str());
    return 0;
}

int validate_command(const CommonOptions& options) {
    auto plan = build_plan(options);
    modiv::validate_plan(plan);
    std::printf("plan %s is valid: %s + %s, %zu sweep points, grid %d x %d over %.1f mm\n",
                plan.name.c_str(), modiv::mode_label(plan.mode_pair.first).c_str(),
                modiv::mode_label(plan.mode_pair.second).c_str(), plan.r0_sweep.size(),
                plan.link.turbulence.grid.samples_per_axis,
                plan.link.turbulence.grid.samples_per_axis,
                plan.link.turbulence.grid.physical_extent * 1e3);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modal-diversity free-space optical link simulator"};
    app.require_subcommand(1);

    CommonOptions run_options;
    auto* run = app.add_subcommand("run", "run a plan's BER sweep and write its artifacts");
    run->add_option("plan", run_options.plan_name, "plan name (paper-n4, paper-n8)");
    add_override_flags(run, run_options);

    CommonOptions crosstalk_options;
    double crosstalk_r0_mm = 17.0;
    int crosstalk_screens = 64;
    auto* crosstalk =
        app.add_subcommand("crosstalk", "export the mode-pair crosstalk matrices");
    crosstalk->add_option("plan", crosstalk_options.plan_name, "plan name");
    crosstalk->add_option("--r0", crosstalk_r0_mm, "Fried parameter [mm]");
    crosstalk->add_option("--crosstalk-screens", crosstalk_screens, "ensemble size");
    add_override_flags(crosstalk, crosstalk_options);

    std::string distances_csv;
    double cn2 = 1e-14;
    double wavelength = 660e-9;
    std::vector<double> target_bers = {0.04, 0.08, 0.15};
    std::string siso_column = "LG21";
    std::string egc_column = "EGC2221";
    std::string distances_out = "modiv-out";
    auto* distances = app.add_subcommand(
        "distances", "equivalent propagation distances and gains from a sweep CSV");
    distances->add_option("csv", distances_csv, "summary CSV from a run")->required();
    distances->add_option("--cn2", cn2, "refractive-index structure parameter [m^-2/3]");
    distances->add_option("--wavelength", wavelength, "wavelength [m]");
    distances->add_option("--bers", target_bers, "target BERs");
    distances->add_option("--siso-col", siso_column, "SISO column name");
    distances->add_option("--egc-col", egc_column, "diversity column name");
    distances->add_option("--out", distances_out, "output directory (MODIV_OUT_DIR overrides)");

    CommonOptions validate_options;
    auto* validate = app.add_subcommand("validate", "validate a plan configuration");
    validate->add_option("plan", validate_options.plan_name, "plan name");
    add_override_flags(validate, validate_options);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(run_options);
        if (crosstalk->parsed())
            return crosstalk_command(crosstalk_options, crosstalk_r0_mm, crosstalk_screens);
        if (distances->parsed())
            return distances_command(distances_csv, cn2, wavelength, target_bers, siso_column,
                                     egc_column, distances_out);
        if (validate->parsed()) return validate_command(validate_options);
    } catch (const std::exception& error) {
        std::fprintf(stderr, "error: %s\n", error.what());
        return 2;
    }
    return 1;
}
