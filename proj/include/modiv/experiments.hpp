#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "modiv/channel.hpp"
#include "modiv/link.hpp"
#include "modiv/modes.hpp"
#include "modiv/turbulence.hpp"

namespace modiv {

/**
 * A canned reproduction run: one orthogonal mode pair, an r0 sweep and a link
 * configuration template whose turbulence strength is overwritten per sweep
 * point.
 */
struct ExperimentPlan {
    std::string name;
    std::pair<ModeSpec, ModeSpec> mode_pair;
    std::vector<double> r0_sweep;  ///< metres, strictly increasing
    LinkConfig link;
    std::vector<std::string> outputs;

    /// Second-moment diameter of the widest mode; used for Strehl reporting.
    double beam_diameter() const {
        const int order = std::max(mode_order(mode_pair.first), mode_order(mode_pair.second));
        return 2.0 * mode_pair.first.waist * std::sqrt(order + 1.0);
    }
};

/// Rejects plans whose mode pair is not orthogonal at common waist, whose
/// sweep leaves the supported range, or whose link template is inconsistent.
inline void validate_plan(const ExperimentPlan& plan) {
    const auto& [first, second] = plan.mode_pair;
    if (first.waist != second.waist)
        throw std::invalid_argument("plan '" + plan.name + "': mode pair must share a waist");
    const GridSpec grid = plan.link.turbulence.grid;
    const std::complex<double> overlap =
        inner_product(evaluate_mode(first, grid), evaluate_mode(second, grid));
    if (std::abs(overlap) >= 1e-6)
        throw std::invalid_argument("plan '" + plan.name + "': mode pair " + mode_label(first) +
                                    "/" + mode_label(second) +
                                    " is not orthogonal (|overlap| = " +
                                    detail::format_double(std::abs(overlap)) + ")");
    if (plan.r0_sweep.empty())
        throw std::invalid_argument("plan '" + plan.name + "': empty r0 sweep");
    for (std::size_t i = 0; i < plan.r0_sweep.size(); ++i) {
        const double r0 = plan.r0_sweep[i];
        if (r0 < 1e-4 || r0 > 5e-2)
            throw std::invalid_argument("plan '" + plan.name +
                                        "': r0 outside supported range [1e-4, 5e-2] m");
        if (i > 0 && r0 <= plan.r0_sweep[i - 1])
            throw std::invalid_argument("plan '" + plan.name +
                                        "': r0 sweep must be strictly increasing");
    }
    plan.link.validate();
}

/**
 * Built-in plans for the two tested mode sets: paper-n4 pairs HG(2,2) with
 * LG(2,1) and paper-n8 pairs HG(4,4) with LG(6,1), both at the waist that
 * puts the N=4 second-moment radius at 1.4 mm. Desk scale runs 1e4 bits over
 * 256 screens; full scale runs 1e6 bits over 1024 screens and adds the
 * 0.1 mm point where the BER saturates at one half.
 */
inline ExperimentPlan builtin_plan(const std::string& name, bool full_scale = false) {
    const double waist = 1.4e-3 / std::sqrt(5.0);  // N=4 second-moment radius = 1.4 mm

    ExperimentPlan plan;
    plan.name = name;
    if (name == "paper-n4") {
        plan.mode_pair = {ModeSpec::hg(2, 2, waist), ModeSpec::lg(2, 1, waist)};
    } else if (name == "paper-n8") {
        plan.mode_pair = {ModeSpec::hg(4, 4, waist), ModeSpec::lg(6, 1, waist)};
    } else {
        throw std::invalid_argument("unknown plan '" + name +
                                    "' (built-in plans: paper-n4, paper-n8)");
    }

    const int order = std::max(mode_order(plan.mode_pair.first), mode_order(plan.mode_pair.second));
    const GridSpec grid(256, 10.0 * waist * std::sqrt(order + 1.0));

    plan.r0_sweep = {0.5e-3, 1.0e-3, 1.4e-3, 2.0e-3, 3.0e-3, 4.5e-3,
                     6.0e-3, 8.0e-3, 10.0e-3, 12.0e-3, 14.0e-3, 17.0e-3};
    if (full_scale) plan.r0_sweep.insert(plan.r0_sweep.begin(), 0.1e-3);

    plan.link.arms = {{plan.mode_pair.first, 0.5}, {plan.mode_pair.second, 0.5}};
    plan.link.receiver_sensitivity = 1.0;
    plan.link.noise_sigma = 0.02;
    plan.link.threshold_fraction = 0.25;
    plan.link.bits_per_screen = full_scale ? 1000000 : 10000;
    plan.link.n_screens = full_scale ? 1024 : 256;
    plan.link.master_seed = 20260811;
    plan.link.turbulence = TurbulenceParams(plan.r0_sweep.front(), grid, 3);
    plan.link.combine = CombineMode::IncoherentPower;

    plan.outputs = {name + "_summary.csv", name + "_detail.csv", name + "_plot.dat",
                    name + "_plot.gp"};
    return plan;
}

struct SweepPoint {
    BerResult ber;
    PointDiagnostics diagnostics;
    double strehl = 0.0;
};

/// BER curves over the r0 sweep for each SISO arm and the diversity receiver.
struct SweepResult {
    std::string plan_name;
    std::vector<std::string> arm_labels;
    std::string combiner_label;
    double beam_diameter = 0.0;
    std::vector<SweepPoint> points;
};

/// "EGC" plus the concatenated arm indices, e.g. EGC2221 for HG22 + LG21.
inline std::string combiner_label(const ExperimentPlan& plan) {
    std::string label = "EGC";
    for (const auto& arm : plan.link.arms)
        label += std::to_string(arm.launch.index1) + std::to_string(arm.launch.index2);
    return label;
}

/**
 * Runs the full sweep: one Monte Carlo point per r0 for each SISO arm and the
 * diversity receiver. Screens are parallelized inside each point; sweep
 * points run in r0 order, so output is deterministic for a given plan and
 * seed no matter the thread count.
 */
inline SweepResult run_sweep(const ExperimentPlan& plan, int n_threads = 1) {
    validate_plan(plan);

    SweepResult result;
    result.plan_name = plan.name;
    for (const auto& arm : plan.link.arms) result.arm_labels.push_back(mode_label(arm.launch));
    result.combiner_label = combiner_label(plan);
    result.beam_diameter = plan.beam_diameter();

    std::vector<ComplexField2D> fields;
    fields.reserve(plan.link.arms.size());
    for (const auto& arm : plan.link.arms)
        fields.push_back(evaluate_mode(arm.launch, plan.link.turbulence.grid));

    for (double r0 : plan.r0_sweep) {
        LinkConfig config = plan.link;
        config.turbulence.r0 = r0;
        SweepPoint point;
        point.ber = simulate_point(config, fields, n_threads, &point.diagnostics);
        point.strehl = strehl_estimate(result.beam_diameter, r0);
        result.points.push_back(std::move(point));
    }
    return result;
}

namespace detail {

inline std::string format_csv_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

/// Summary CSV mirroring the experimental column layout:
/// r0,SR,<arm labels...>,EGC,bits,screens with r0 in millimetres.
inline std::string to_summary_csv(const SweepResult& result) {
    std::string out = "r0,SR";
    for (const auto& label : result.arm_labels) out += "," + label;
    out += "," + result.combiner_label + ",bits,screens\n";
    for (const auto& point : result.points) {
        out += detail::format_csv_value(point.ber.r0 * 1e3);
        out += "," + detail::format_csv_value(point.strehl);
        for (double ber : point.ber.ber_per_arm) out += "," + detail::format_csv_value(ber);
        out += "," + detail::format_csv_value(point.ber.ber_diversity);
        out += "," + std::to_string(point.ber.bits_tested);
        out += "," + std::to_string(point.ber.screens_used);
        out += "\n";
    }
    return out;
}

/// Companion CSV with screen-level 3-sigma error bars, mean coupling powers
/// and the excluded cross-arm leakage.
inline std::string to_detail_csv(const SweepResult& result) {
    std::string out = "r0,SR";
    for (const auto& label : result.arm_labels)
        out += "," + label + "_ber," + label + "_err3s," + label + "_mean_gain2";
    out += "," + result.combiner_label + "_ber," + result.combiner_label + "_err3s,leak_mean";
    out += ",bits,screens\n";
    for (const auto& point : result.points) {
        out += detail::format_csv_value(point.ber.r0 * 1e3);
        out += "," + detail::format_csv_value(point.strehl);
        for (std::size_t a = 0; a < point.ber.ber_per_arm.size(); ++a) {
            out += "," + detail::format_csv_value(point.ber.ber_per_arm[a]);
            out += "," + detail::format_csv_value(point.diagnostics.ber_err3s[a]);
            out += "," + detail::format_csv_value(point.diagnostics.mean_self_power[a]);
        }
        out += "," + detail::format_csv_value(point.ber.ber_diversity);
        out += "," + detail::format_csv_value(point.diagnostics.ber_err3s.back());
        out += "," + detail::format_csv_value(point.diagnostics.mean_leak_power);
        out += "," + std::to_string(point.ber.bits_tested);
        out += "," + std::to_string(point.ber.screens_used);
        out += "\n";
    }
    return out;
}

/// BER formatted for human-readable reports: an exact zero prints as the
/// resolution bound "< 1/bits" instead of overstating the precision.
inline std::string display_ber(double ber, std::int64_t bits_tested) {
    if (ber == 0.0 && bits_tested > 0)
        return "<" + detail::format_csv_value(1.0 / static_cast<double>(bits_tested));
    return detail::format_csv_value(ber);
}

/**
 * Plot-ready artifacts: a whitespace data table (r0 in mm, one BER column per
 * series) and a gnuplot script that renders the semilog BER figure.
 */
inline void render_plot_data(const SweepResult& result, const std::filesystem::path& data_path,
                             const std::filesystem::path& script_path) {
    if (result.points.empty()) throw std::invalid_argument("render_plot_data: empty curve");

    auto data = detail::open_output(data_path);
    data << "# r0_mm";
    for (const auto& label : result.arm_labels) data << ' ' << label;
    data << ' ' << result.combiner_label << '\n';
    for (const auto& point : result.points) {
        data << detail::format_csv_value(point.ber.r0 * 1e3);
        for (double ber : point.ber.ber_per_arm) data << ' ' << detail::format_csv_value(ber);
        data << ' ' << detail::format_csv_value(point.ber.ber_diversity) << '\n';
    }

    auto script = detail::open_output(script_path);
    script << "set terminal pngcairo size 900,600\n";
    script << "set output '" << result.plan_name << "_ber.png'\n";
    script << "set logscale y\n";
    script << "set grid\n";
    script << "set xlabel 'Turbulence r_0 [mm]'\n";
    script << "set ylabel 'Bit Error Rate (BER)'\n";
    script << "set key top right\n";
    script << "plot";
    for (std::size_t a = 0; a < result.arm_labels.size(); ++a)
        script << (a == 0 ? " " : ", ") << "'" << data_path.filename().string() << "' using 1:"
               << (a + 2) << " with linespoints dashtype 2 title '" << result.arm_labels[a] << "'";
    script << ", '" << data_path.filename().string() << "' using 1:"
           << (result.arm_labels.size() + 2) << " with linespoints lw 2 title 'Diversity'\n";
}

/// Writes summary, detail and plot artifacts into `directory`; returns paths.
inline std::vector<std::filesystem::path> write_sweep_outputs(
    const SweepResult& result, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    const auto summary = directory / (result.plan_name + "_summary.csv");
    const auto detail_path = directory / (result.plan_name + "_detail.csv");
    const auto plot_data = directory / (result.plan_name + "_plot.dat");
    const auto plot_script = directory / (result.plan_name + "_plot.gp");
    detail::open_output(summary) << to_summary_csv(result);
    detail::open_output(detail_path) << to_detail_csv(result);
    render_plot_data(result, plot_data, plot_script);
    return {summary, detail_path, plot_data, plot_script};
}

/// One BER-vs-r0 series, r0 ascending in metres.
struct BerSeries {
    std::vector<double> r0;
    std::vector<double> ber;
};

inline BerSeries extract_series(const SweepResult& result, const std::string& label) {
    BerSeries series;
    int column = -1;
    for (std::size_t a = 0; a < result.arm_labels.size(); ++a)
        if (result.arm_labels[a] == label) column = static_cast<int>(a);
    const bool use_combiner = label == result.combiner_label;
    if (column < 0 && !use_combiner)
        throw std::invalid_argument("extract_series: unknown series '" + label + "'");
    for (const auto& point : result.points) {
        series.r0.push_back(point.ber.r0);
        series.ber.push_back(use_combiner ? point.ber.ber_diversity
                                          : point.ber.ber_per_arm[static_cast<std::size_t>(column)]);
    }
    return series;
}

namespace detail {

/**
 * r0 at which the curve crosses the target BER, by monotone piecewise-linear
 * interpolation in (log BER, r0). The series is first clamped to a
 * non-increasing-in-r0 envelope so Monte Carlo jitter cannot invent extra
 * crossings; zero BER entries are unresolvable at the tested bit count and
 * are dropped. Targets outside the resolvable range return nullopt.
 */
inline std::optional<double> interpolate_r0_at_ber(const BerSeries& series, double target) {
    if (!(target > 0.0)) return std::nullopt;
    std::vector<double> r0;
    std::vector<double> ber;
    for (std::size_t i = 0; i < series.r0.size(); ++i) {
        if (series.ber[i] > 0.0) {
            r0.push_back(series.r0[i]);
            ber.push_back(series.ber[i]);
        }
    }
    if (r0.size() < 2) return std::nullopt;
    // monotone envelope, scanning from weak turbulence towards strong
    for (std::size_t i = ber.size(); i-- > 1;)
        if (ber[i - 1] < ber[i]) ber[i - 1] = ber[i];
    if (target < ber.back() || target > ber.front()) return std::nullopt;
    for (std::size_t i = 0; i + 1 < ber.size(); ++i) {
        if (target <= ber[i] && target >= ber[i + 1]) {
            if (ber[i] == ber[i + 1]) return r0[i];
            const double t =
                (std::log(target) - std::log(ber[i])) / (std::log(ber[i + 1]) - std::log(ber[i]));
            return r0[i] + t * (r0[i + 1] - r0[i]);
        }
    }
    return std::nullopt;
}

}  // namespace detail

struct DistanceGainRow {
    double target_ber = 0.0;
    bool achievable = false;
    double r0_siso = std::nan("");
    double r0_diversity = std::nan("");
    double z_siso = std::nan("");
    double z_diversity = std::nan("");
    double gain_percent = std::nan("");
};

/**
 * For each target BER, the r0 at which the SISO and diversity curves cross
 * it, the equivalent propagation distances and the distance gain
 * (z_div / z_siso - 1) * 100. Since z scales as r0^(-5/3), the gain depends
 * only on the r0 ratio. Targets outside either curve's range are flagged as
 * not achievable rather than extrapolated.
 */
inline std::vector<DistanceGainRow> distance_gain_table(const BerSeries& siso,
                                                        const BerSeries& diversity,
                                                        const std::vector<double>& target_bers,
                                                        const AtmosphereModel& atmosphere) {
    std::vector<DistanceGainRow> table;
    for (double target : target_bers) {
        DistanceGainRow row;
        row.target_ber = target;
        const auto r0_siso = detail::interpolate_r0_at_ber(siso, target);
        const auto r0_div = detail::interpolate_r0_at_ber(diversity, target);
        if (r0_siso && r0_div) {
            row.achievable = true;
            row.r0_siso = *r0_siso;
            row.r0_diversity = *r0_div;
            row.z_siso = z_from_r0(atmosphere, row.r0_siso);
            row.z_diversity = z_from_r0(atmosphere, row.r0_diversity);
            row.gain_percent = (row.z_diversity / row.z_siso - 1.0) * 100.0;
        }
        table.push_back(row);
    }
    return table;
}

inline std::string to_distance_csv(const std::vector<DistanceGainRow>& table) {
    std::string out = "target_ber,achievable,r0_siso_mm,r0_div_mm,z_siso_km,z_div_km,gain_percent\n";
    for (const auto& row : table) {
        out += detail::format_csv_value(row.target_ber);
        out += row.achievable ? ",1" : ",0";
        if (row.achievable) {
            out += "," + detail::format_csv_value(row.r0_siso * 1e3);
            out += "," + detail::format_csv_value(row.r0_diversity * 1e3);
            out += "," + detail::format_csv_value(row.z_siso * 1e-3);
            out += "," + detail::format_csv_value(row.z_diversity * 1e-3);
            out += "," + detail::format_csv_value(row.gain_percent);
        } else {
            out += ",,,,,";
        }
        out += "\n";
    }
    return out;
}

/// Key/value overrides accepted from a plan config file.
struct PlanOverrides {
    std::optional<std::string> plan;
    std::optional<int> bits_per_screen;
    std::optional<int> screens;
    std::optional<std::uint64_t> seed;
    std::optional<double> noise_sigma;
    std::optional<double> threshold;
    std::optional<double> waist;
    std::optional<int> grid_samples;
    std::optional<double> grid_extent;
    std::optional<int> subharmonics;
    std::optional<std::string> combine;
    std::optional<bool> full_scale;
};

/**
 * Parses a plain key = value config file ('#' starts a comment). Recognized
 * keys: plan, bits_per_screen, screens, seed, noise_sigma, threshold, waist,
 * grid_samples, grid_extent, subharmonics, combine, full_scale. Unknown keys
 * are rejected so typos fail validation instead of silently running defaults.
 */
inline PlanOverrides parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    PlanOverrides overrides;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const auto begin = s.find_first_not_of(" \t\r");
            if (begin == std::string::npos) return std::string();
            const auto end = s.find_last_not_of(" \t\r");
            return s.substr(begin, end - begin + 1);
        };
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "plan") overrides.plan = value;
            else if (key == "bits_per_screen") overrides.bits_per_screen = std::stoi(value);
            else if (key == "screens") overrides.screens = std::stoi(value);
            else if (key == "seed") overrides.seed = std::stoull(value);
            else if (key == "noise_sigma") overrides.noise_sigma = std::stod(value);
            else if (key == "threshold") overrides.threshold = std::stod(value);
            else if (key == "waist") overrides.waist = std::stod(value);
            else if (key == "grid_samples") overrides.grid_samples = std::stoi(value);
            else if (key == "grid_extent") overrides.grid_extent = std::stod(value);
            else if (key == "subharmonics") overrides.subharmonics = std::stoi(value);
            else if (key == "combine") overrides.combine = value;
            else if (key == "full_scale") overrides.full_scale = (value == "true" || value == "1");
            else
                throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                                     ": bad value for '" + key + "'");
        }
    }
    return overrides;
}

/// Applies overrides on top of a plan. Waist or grid changes re-derive the
/// mode pair and arms so the plan stays self-consistent.
inline void apply_overrides(ExperimentPlan& plan, const PlanOverrides& overrides) {
    if (overrides.waist) {
        const double waist = *overrides.waist;
        auto rebuild = [waist](const ModeSpec& spec) {
            return spec.family == ModeFamily::hg
                       ? ModeSpec::hg(spec.index1, spec.index2, waist)
                       : ModeSpec::lg(spec.index1, spec.index2, waist);
        };
        plan.mode_pair.first = rebuild(plan.mode_pair.first);
        plan.mode_pair.second = rebuild(plan.mode_pair.second);
        for (auto& arm : plan.link.arms) arm.launch = rebuild(arm.launch);
        const int order =
            std::max(mode_order(plan.mode_pair.first), mode_order(plan.mode_pair.second));
        plan.link.turbulence.grid =
            GridSpec(plan.link.turbulence.grid.samples_per_axis,
                     10.0 * waist * std::sqrt(order + 1.0));
    }
    if (overrides.grid_samples || overrides.grid_extent) {
        GridSpec grid = plan.link.turbulence.grid;
        plan.link.turbulence.grid =
            GridSpec(overrides.grid_samples.value_or(grid.samples_per_axis),
                     overrides.grid_extent.value_or(grid.physical_extent));
    }
    if (overrides.bits_per_screen) plan.link.bits_per_screen = *overrides.bits_per_screen;
    if (overrides.screens) plan.link.n_screens = *overrides.screens;
    if (overrides.seed) plan.link.master_seed = *overrides.seed;
    if (overrides.noise_sigma) plan.link.noise_sigma = *overrides.noise_sigma;
    if (overrides.threshold) plan.link.threshold_fraction = *overrides.threshold;
    if (overrides.subharmonics) plan.link.turbulence.subharmonic_levels = *overrides.subharmonics;
    if (overrides.combine) {
        if (*overrides.combine == "incoherent")
            plan.link.combine = CombineMode::IncoherentPower;
        else if (*overrides.combine == "coherent")
            plan.link.combine = CombineMode::CoherentField;
        else
            throw std::runtime_error("combine must be 'incoherent' or 'coherent'");
    }
}

}  // namespace modiv
