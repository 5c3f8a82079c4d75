#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <vector>

#include "modiv/channel.hpp"
#include "modiv/modes.hpp"
#include "modiv/turbulence.hpp"

using namespace modiv;

namespace {

const double kWaist = 1.4e-3 / std::sqrt(5.0);
const GridSpec kGrid(256, 10.0 * kWaist * std::sqrt(5.0));

// r0 at which the N=4 beam sees a Strehl ratio of about 0.95
const double kSlightTurbulenceR0 = 2.8e-3 * std::pow(1.03 / -std::log(0.95), 3.0 / 5.0);

PhaseScreen constant_screen(const GridSpec& grid, double value) {
    return {grid, std::vector<double>(static_cast<std::size_t>(grid.pixel_count()), value)};
}

}  // namespace

TEST_CASE("apply_screen") {
    const auto mode = evaluate_hg(1, 1, kWaist, kGrid);

    SECTION("zero screen leaves the field unchanged") {
        const auto out = apply_screen(mode, constant_screen(kGrid, 0.0));
        for (std::size_t i = 0; i < mode.samples.size(); ++i)
            CHECK(out.samples[i] == mode.samples[i]);
    }

    SECTION("constant screen is a global phase") {
        const double c = 0.8;
        const auto out = apply_screen(mode, constant_screen(kGrid, c));
        const auto overlap = inner_product(mode, out);
        CHECK(std::abs(overlap - std::polar(1.0, c)) < 1e-12);
        CHECK(std::abs(std::norm(overlap) - 1.0) < 1e-12);
    }

    SECTION("power is conserved under random screens") {
        const auto screen = generate_screen(TurbulenceParams(2e-3, kGrid, 3), 17);
        const auto out = apply_screen(mode, screen);
        CHECK(total_power(out) == Catch::Approx(total_power(mode)).margin(1e-12));
    }

    SECTION("grid mismatch is rejected") {
        CHECK_THROWS_AS(apply_screen(mode, constant_screen(GridSpec(128, 0.014), 0.0)),
                        std::invalid_argument);
    }
}

TEST_CASE("coupling_gain") {
    const auto hg = evaluate_hg(2, 2, kWaist, kGrid);
    const auto lg = evaluate_lg(2, 1, kWaist, kGrid);

    SECTION("no turbulence: matched detection is lossless, orthogonal pair is dark") {
        const auto none = constant_screen(kGrid, 0.0);
        CHECK(std::norm(coupling_gain(hg, hg, none)) == Catch::Approx(1.0).margin(1e-6));
        CHECK(std::norm(coupling_gain(hg, lg, none)) < 1e-6);
        CHECK(std::norm(coupling_gain(lg, hg, none)) < 1e-6);
    }

    SECTION("ModeSpec interface matches the field interface") {
        const auto screen = generate_screen(TurbulenceParams(8e-3, kGrid, 3), 4);
        const auto via_spec = coupling_gain(ModeSpec::hg(2, 2, kWaist),
                                            ModeSpec::lg(2, 1, kWaist), screen, kGrid);
        const auto via_fields = coupling_gain(hg, lg, screen);
        CHECK(std::abs(via_spec - via_fields) < 1e-12);
    }

    SECTION("slight turbulence (SR = 0.95): cross coupling stays below 0.05") {
        const TurbulenceParams params(kSlightTurbulenceR0, kGrid, 3);
        double mean_cross = 0.0;
        const int screens = 64;
        for (int s = 0; s < screens; ++s) {
            const auto screen = generate_screen(params, derive_seed(11, 3, s));
            mean_cross += std::norm(coupling_gain(hg, lg, screen));
        }
        mean_cross /= screens;
        CHECK(mean_cross > 0.0);
        CHECK(mean_cross < 0.05);
    }

    SECTION("gain sample magnitude is bounded by unity") {
        const auto screen = generate_screen(TurbulenceParams(1e-3, kGrid, 3), 12);
        const auto h = coupling_gain(hg, hg, screen);
        CHECK(std::abs(h) <= 1.0 + 1e-9);
        CHECK_NOTHROW(ChannelGainSample(ModeSpec::hg(2, 2, kWaist), ModeSpec::hg(2, 2, kWaist),
                                        12, h));
        CHECK_THROWS_AS(ChannelGainSample(ModeSpec::hg(2, 2, kWaist),
                                          ModeSpec::hg(2, 2, kWaist), 12, {1.1, 0.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("channel invariants") {
    SECTION("energy bound for an orthonormal detection set") {
        std::vector<ComplexField2D> detectors;
        for (int n = 0; n <= 4; ++n)
            for (int m = 0; n + m <= 4; ++m) detectors.push_back(evaluate_hg(n, m, kWaist, kGrid));
        const auto screen = generate_screen(TurbulenceParams(2e-3, kGrid, 3), 21);
        const auto faded = apply_screen(evaluate_hg(1, 2, kWaist, kGrid), screen);
        double captured = 0.0;
        for (const auto& d : detectors) captured += std::norm(inner_product(d, faded));
        CHECK(captured <= total_power(faded) + 1e-6);
    }

    SECTION("adding a constant to a screen changes no |h|^2") {
        const auto hg = evaluate_hg(2, 2, kWaist, kGrid);
        const auto lg = evaluate_lg(2, 1, kWaist, kGrid);
        auto screen = generate_screen(TurbulenceParams(4e-3, kGrid, 3), 8);
        const double h2 = std::norm(coupling_gain(hg, lg, screen));
        for (double& v : screen.phase) v += 1.234;
        CHECK(std::norm(coupling_gain(hg, lg, screen)) == Catch::Approx(h2).epsilon(1e-12));
    }

    SECTION("projection reciprocity |<A, e^{i phi} B>| = |<B, e^{-i phi} A>|") {
        const auto a = evaluate_hg(2, 2, kWaist, kGrid);
        const auto b = evaluate_lg(2, 1, kWaist, kGrid);
        auto screen = generate_screen(TurbulenceParams(4e-3, kGrid, 3), 9);
        const double forward = std::abs(coupling_gain(b, a, screen));
        for (double& v : screen.phase) v = -v;
        const double backward = std::abs(coupling_gain(a, b, screen));
        CHECK(forward == Catch::Approx(backward).epsilon(1e-12));
    }
}

TEST_CASE("crosstalk_matrix") {
    const std::vector<ModeSpec> pair{ModeSpec::hg(2, 2, kWaist), ModeSpec::lg(2, 1, kWaist)};

    SECTION("input validation") {
        CHECK_THROWS_AS(crosstalk_matrix({}, TurbulenceParams(1e-2, kGrid, 3), 4, 1),
                        std::invalid_argument);
        CHECK_THROWS_AS(crosstalk_matrix(pair, TurbulenceParams(1e-2, kGrid, 3), 0, 1),
                        std::invalid_argument);
    }

    SECTION("no effective turbulence gives the identity") {
        const TurbulenceParams params(1000.0 * kGrid.physical_extent, kGrid, 3);
        const auto matrix = crosstalk_matrix(pair, params, 4, 5);
        CHECK(matrix.at(0, 0) == Catch::Approx(1.0).margin(1e-4));
        CHECK(matrix.at(1, 1) == Catch::Approx(1.0).margin(1e-4));
        CHECK(matrix.at(0, 1) < 1e-6);
        CHECK(matrix.at(1, 0) < 1e-6);
    }

    SECTION("slight turbulence keeps the matrix visibly near-diagonal") {
        const TurbulenceParams params(kSlightTurbulenceR0, kGrid, 3);
        const auto matrix = crosstalk_matrix(pair, params, 48, 5);
        CHECK(matrix.at(0, 0) > 10.0 * matrix.at(0, 1));
        CHECK(matrix.at(1, 1) > 10.0 * matrix.at(1, 0));
    }

    SECTION("diagonal entries decrease as turbulence strengthens", "[slow]") {
        // 5-point r0 grid; shared screen seeds make the trend essentially
        // noise free, so a strict decrease stands in for the 3-sigma check
        double previous_hg = 0.0, previous_lg = 0.0;
        for (double r0 : {1e-3, 2e-3, 4e-3, 8e-3, 16e-3}) {
            const auto matrix =
                crosstalk_matrix(pair, TurbulenceParams(r0, kGrid, 3), 32, 777);
            if (previous_hg > 0.0) {
                CHECK(matrix.at(0, 0) > previous_hg);
                CHECK(matrix.at(1, 1) > previous_lg);
            }
            previous_hg = matrix.at(0, 0);
            previous_lg = matrix.at(1, 1);
        }
    }

    SECTION("row sums stay below one plus tolerance for an orthonormal set") {
        const auto matrix =
            crosstalk_matrix(pair, TurbulenceParams(3e-3, kGrid, 3), 16, 31);
        for (int i = 0; i < 2; ++i)
            CHECK(matrix.at(i, 0) + matrix.at(i, 1) <= 1.0 + 1e-6);
    }

    SECTION("threading does not change the result") {
        const TurbulenceParams params(4e-3, kGrid, 3);
        const auto serial = crosstalk_matrix(pair, params, 12, 9, 1);
        const auto parallel = crosstalk_matrix(pair, params, 12, 9, 8);
        CHECK(serial.mean_power == parallel.mean_power);
    }

    SECTION("CSV export carries the underscored labels") {
        const auto matrix =
            crosstalk_matrix(pair, TurbulenceParams(1e-2, kGrid, 3), 2, 1);
        std::ostringstream out;
        write_crosstalk_csv(out, matrix);
        const std::string text = out.str();
        CHECK(text.find("HG_2_2") != std::string::npos);
        CHECK(text.find("LG_2_1") != std::string::npos);
        CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    }
}
