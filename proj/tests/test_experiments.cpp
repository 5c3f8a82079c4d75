#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "modiv/experiments.hpp"

using namespace modiv;

namespace {

/// Cheap plan for structural tests: few screens, few bits, three r0 points.
ExperimentPlan small_plan() {
    auto plan = builtin_plan("paper-n4");
    plan.link.bits_per_screen = 400;
    plan.link.n_screens = 12;
    plan.r0_sweep = {1e-3, 4e-3, 16e-3};
    return plan;
}

}  // namespace

TEST_CASE("builtin plans validate and carry the experimental geometry") {
    for (const char* name : {"paper-n4", "paper-n8"}) {
        const auto plan = builtin_plan(name);
        CHECK_NOTHROW(validate_plan(plan));
        CHECK(plan.r0_sweep.size() == 12);
        CHECK(plan.r0_sweep.front() == 0.5e-3);
        CHECK(plan.r0_sweep.back() == 17e-3);
        CHECK(plan.link.bits_per_screen == 10000);
        CHECK(plan.link.n_screens == 256);
    }
    // waist chosen so the N=4 second-moment radius is 1.4 mm
    const auto plan = builtin_plan("paper-n4");
    CHECK(plan.mode_pair.first.waist == Catch::Approx(0.626e-3).margin(1e-6));
    CHECK(plan.beam_diameter() == Catch::Approx(2.8e-3).margin(1e-9));

    const auto full = builtin_plan("paper-n4", true);
    CHECK(full.r0_sweep.front() == 0.1e-3);
    CHECK(full.link.bits_per_screen == 1000000);
    CHECK(full.link.n_screens == 1024);

    CHECK_THROWS_AS(builtin_plan("paper-n5"), std::invalid_argument);
}

TEST_CASE("plan validation rejects broken plans") {
    SECTION("non-orthogonal mode pair") {
        auto plan = builtin_plan("paper-n4");
        // LG(4,0) has order 4 but a large overlap with HG22
        plan.mode_pair.second = ModeSpec::lg(4, 0, plan.mode_pair.first.waist);
        plan.link.arms[1].launch = plan.mode_pair.second;
        CHECK_THROWS_WITH(validate_plan(plan),
                          Catch::Matchers::ContainsSubstring("not orthogonal"));
    }

    SECTION("sweep must be strictly increasing and in range") {
        auto plan = builtin_plan("paper-n4");
        plan.r0_sweep = {4e-3, 4e-3};
        CHECK_THROWS_AS(validate_plan(plan), std::invalid_argument);
        plan.r0_sweep = {5e-5};
        CHECK_THROWS_AS(validate_plan(plan), std::invalid_argument);
        plan.r0_sweep = {6e-2};
        CHECK_THROWS_AS(validate_plan(plan), std::invalid_argument);
        plan.r0_sweep = {};
        CHECK_THROWS_AS(validate_plan(plan), std::invalid_argument);
    }

    SECTION("mismatched waists") {
        auto plan = builtin_plan("paper-n4");
        plan.mode_pair.second = ModeSpec::lg(2, 1, 0.7e-3);
        CHECK_THROWS_AS(validate_plan(plan), std::invalid_argument);
    }
}

TEST_CASE("run_sweep output structure") {
    auto plan = small_plan();
    const auto result = run_sweep(plan, 4);

    REQUIRE(result.points.size() == 3);
    CHECK(result.arm_labels == std::vector<std::string>{"HG22", "LG21"});
    CHECK(result.combiner_label == "EGC2221");

    const std::string csv = to_summary_csv(result);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "r0,SR,HG22,LG21,EGC2221,bits,screens");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 3);

    SECTION("degenerate single-point sweep gives a one-row CSV") {
        plan.r0_sweep = {4e-3};
        const auto single = run_sweep(plan, 2);
        const std::string single_csv = to_summary_csv(single);
        CHECK(std::count(single_csv.begin(), single_csv.end(), '\n') == 2);
    }
}

TEST_CASE("byte-identical CSV from serial and 8-way parallel runs") {
    const auto plan = small_plan();
    const auto serial = run_sweep(plan, 1);
    const auto parallel = run_sweep(plan, 8);
    CHECK(to_summary_csv(serial) == to_summary_csv(parallel));
    CHECK(to_detail_csv(serial) == to_detail_csv(parallel));
}

TEST_CASE("paper-n8 combiner label matches the experimental column name") {
    auto plan = builtin_plan("paper-n8");
    CHECK(combiner_label(plan) == "EGC4461");
}

TEST_CASE("display_ber replaces exact zero with the resolution bound") {
    CHECK(display_ber(0.0, 2560000) == "<3.90625e-07");
    CHECK(display_ber(0.125, 2560000) == "0.125");
}

TEST_CASE("render_plot_data") {
    const auto result = run_sweep(small_plan(), 4);
    const auto dir = std::filesystem::temp_directory_path() / "modiv_test_plot";
    std::filesystem::remove_all(dir);

    render_plot_data(result, dir / "n4.dat", dir / "n4.gp");
    std::ifstream data(dir / "n4.dat");
    REQUIRE(data.good());
    std::string line;
    std::getline(data, line);
    CHECK(line == "# r0_mm HG22 LG21 EGC2221");
    int rows = 0;
    while (std::getline(data, line)) ++rows;
    CHECK(rows == 3);

    std::ifstream script(dir / "n4.gp");
    std::stringstream buffer;
    buffer << script.rdbuf();
    CHECK(buffer.str().find("set logscale y") != std::string::npos);

    SECTION("empty curve is rejected") {
        SweepResult empty;
        empty.plan_name = "x";
        CHECK_THROWS_AS(render_plot_data(empty, dir / "x.dat", dir / "x.gp"),
                        std::invalid_argument);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("distance gain table") {
    const AtmosphereModel atmosphere(1e-14, 660e-9);

    SECTION("gains follow the r0 pairs read off the curves") {
        // synthetic log-linear curves passing exactly through the published
        // r0 pairs at the published BERs
        BerSeries siso, diversity;
        for (double r0 : {2.0e-3, 2.68e-3, 4.5e-3, 7.4e-3, 10.2e-3, 12.8e-3, 16.6e-3, 18e-3}) {
            siso.r0.push_back(r0);
            diversity.r0.push_back(r0);
        }
        const auto on_curve = [](const std::vector<double>& knot_r0,
                                 const std::vector<double>& knot_ber, double r0) {
            // log-linear through the two nearest knots
            std::size_t i = 0;
            while (i + 2 < knot_r0.size() && knot_r0[i + 1] < r0) ++i;
            const double t = (r0 - knot_r0[i]) / (knot_r0[i + 1] - knot_r0[i]);
            return std::exp(std::log(knot_ber[i]) +
                            t * (std::log(knot_ber[i + 1]) - std::log(knot_ber[i])));
        };
        const std::vector<double> siso_knots_r0 = {2.0e-3, 4.5e-3, 10.2e-3, 16.6e-3, 18e-3};
        const std::vector<double> siso_knots_ber = {0.3, 0.15, 0.08, 0.04, 0.03};
        const std::vector<double> div_knots_r0 = {2.0e-3, 2.68e-3, 7.4e-3, 12.8e-3, 18e-3};
        const std::vector<double> div_knots_ber = {0.25, 0.15, 0.08, 0.04, 0.02};
        for (std::size_t i = 0; i < siso.r0.size(); ++i) {
            siso.ber.push_back(on_curve(siso_knots_r0, siso_knots_ber, siso.r0[i]));
            diversity.ber.push_back(on_curve(div_knots_r0, div_knots_ber, diversity.r0[i]));
        }

        const auto table =
            distance_gain_table(siso, diversity, {0.04, 0.08, 0.15}, atmosphere);
        REQUIRE(table.size() == 3);
        CHECK(table[0].achievable);
        CHECK(table[0].r0_siso == Catch::Approx(16.6e-3).epsilon(1e-6));
        CHECK(table[0].r0_diversity == Catch::Approx(12.8e-3).epsilon(1e-6));
        CHECK(table[0].gain_percent == Catch::Approx(54.0).margin(1.0));
        CHECK(table[1].gain_percent == Catch::Approx(71.0).margin(1.0));
        CHECK(table[2].gain_percent == Catch::Approx(137.0).margin(1.0));
    }

    SECTION("identical curves give zero gain at every target") {
        BerSeries curve;
        curve.r0 = {2e-3, 5e-3, 10e-3, 17e-3};
        curve.ber = {0.4, 0.1, 0.03, 0.01};
        const auto table = distance_gain_table(curve, curve, {0.05, 0.2}, atmosphere);
        for (const auto& row : table) {
            CHECK(row.achievable);
            CHECK(row.gain_percent == Catch::Approx(0.0).margin(1e-9));
        }
    }

    SECTION("targets outside the resolvable range are flagged, not extrapolated") {
        BerSeries curve;
        curve.r0 = {2e-3, 5e-3, 10e-3, 17e-3};
        curve.ber = {0.4, 0.1, 0.03, 0.0};  // weakest point unresolved (zero errors)
        const auto table = distance_gain_table(curve, curve, {0.5, 0.01}, atmosphere);
        CHECK_FALSE(table[0].achievable);
        CHECK_FALSE(table[1].achievable);
        const auto inside = distance_gain_table(curve, curve, {0.05}, atmosphere);
        CHECK(inside[0].achievable);
    }
}

TEST_CASE("config files parse and override plans") {
    const auto dir = std::filesystem::temp_directory_path() / "modiv_test_cfg";
    std::filesystem::create_directories(dir);
    const auto path = dir / "run.cfg";
    {
        std::ofstream out(path);
        out << "# example config\n";
        out << "plan = paper-n8\n";
        out << "bits_per_screen = 1234\n";
        out << "screens = 17\n";
        out << "seed = 555\n";
        out << "noise_sigma = 0.05\n";
        out << "threshold = 0.4\n";
        out << "combine = coherent\n";
    }
    const auto overrides = parse_config_file(path);
    CHECK(overrides.plan == "paper-n8");

    auto plan = builtin_plan(*overrides.plan);
    apply_overrides(plan, overrides);
    CHECK(plan.link.bits_per_screen == 1234);
    CHECK(plan.link.n_screens == 17);
    CHECK(plan.link.master_seed == 555);
    CHECK(plan.link.noise_sigma == 0.05);
    CHECK(plan.link.threshold_fraction == 0.4);
    CHECK(plan.link.combine == CombineMode::CoherentField);
    CHECK_NOTHROW(validate_plan(plan));

    SECTION("unknown keys are rejected") {
        const auto bad = dir / "bad.cfg";
        std::ofstream(bad) << "bitz = 3\n";
        CHECK_THROWS_AS(parse_config_file(bad), std::runtime_error);
    }

    SECTION("waist override rebuilds modes and grid") {
        PlanOverrides tweak;
        tweak.waist = 1e-3;
        auto scaled = builtin_plan("paper-n4");
        apply_overrides(scaled, tweak);
        CHECK(scaled.mode_pair.first.waist == 1e-3);
        CHECK(scaled.link.arms[1].launch.waist == 1e-3);
        CHECK(scaled.link.turbulence.grid.physical_extent ==
              Catch::Approx(10e-3 * std::sqrt(5.0)));
        CHECK_NOTHROW(validate_plan(scaled));
    }
    std::filesystem::remove_all(dir);
}
