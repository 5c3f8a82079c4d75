#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <sstream>

#include "modiv/grid.hpp"
#include "modiv/modes.hpp"

using namespace modiv;

namespace {

ComplexField2D random_field(const GridSpec& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ComplexField2D f(grid);
    for (auto& v : f.samples) v = {normal(rng), normal(rng)};
    return f;
}

}  // namespace

TEST_CASE("GridSpec validates its invariants") {
    CHECK_THROWS_AS(GridSpec(1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec(255, 1.0), std::invalid_argument);  // odd
    CHECK_THROWS_AS(GridSpec(256, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec(256, -1.0), std::invalid_argument);

    const GridSpec grid(256, 0.014);
    CHECK(grid.pitch() == Catch::Approx(0.014 / 256));
    // pixel-centred coordinates are symmetric about the axis
    CHECK(grid.coordinate(0) == Catch::Approx(-grid.coordinate(255)));
    CHECK(grid.coordinate(127) == Catch::Approx(-grid.coordinate(128)));
}

TEST_CASE("inner_product basics") {
    const GridSpec grid(64, 1.0e-2);

    SECTION("grid mismatch is rejected") {
        const ComplexField2D a(grid), b(GridSpec(64, 2.0e-2));
        CHECK_THROWS_AS(inner_product(a, b), std::invalid_argument);
    }

    SECTION("normalized field has unit self overlap") {
        const auto f = normalize(random_field(grid, 7));
        const auto self = inner_product(f, f);
        CHECK(self.real() == Catch::Approx(1.0).margin(1e-12));
        CHECK(self.imag() == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("conjugate symmetry on random fields") {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const auto a = random_field(grid, 100 + seed);
            const auto b = random_field(grid, 200 + seed);
            const auto ab = inner_product(a, b);
            const auto ba = inner_product(b, a);
            CHECK(std::abs(ab - std::conj(ba)) <= 1e-12 * std::abs(ab));
        }
    }

    SECTION("linearity in the second argument") {
        const auto a = random_field(grid, 1);
        const auto b = random_field(grid, 2);
        const auto c = random_field(grid, 3);
        const std::complex<double> alpha{0.7, -1.3};
        ComplexField2D combo(grid);
        for (std::size_t i = 0; i < combo.samples.size(); ++i)
            combo.samples[i] = alpha * b.samples[i] + c.samples[i];
        const auto lhs = inner_product(a, combo);
        const auto rhs = alpha * inner_product(a, b) + inner_product(a, c);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
    }
}

TEST_CASE("total_power scaling and edge cases") {
    const GridSpec grid(64, 1.0e-2);

    const ComplexField2D zero(grid);
    CHECK(total_power(zero) == 0.0);

    const auto f = normalize(random_field(grid, 11));
    CHECK(total_power(f) == Catch::Approx(1.0).margin(1e-12));
    CHECK(total_power(scaled(f, 2.0)) == Catch::Approx(4.0).margin(1e-11));
}

TEST_CASE("normalize") {
    const GridSpec grid(64, 1.0e-2);

    SECTION("zero-power field is rejected, not NaN") {
        CHECK_THROWS_AS(normalize(ComplexField2D(grid)), std::invalid_argument);
    }

    SECTION("field with power 4 is halved") {
        auto f = normalize(random_field(grid, 5));
        const auto doubled = scaled(f, 2.0);
        const auto back = normalize(doubled);
        for (std::size_t i = 0; i < f.samples.size(); ++i)
            CHECK(std::abs(back.samples[i] - f.samples[i]) < 1e-12);
    }

    SECTION("idempotence") {
        const auto once = normalize(random_field(grid, 6));
        const auto twice = normalize(once);
        for (std::size_t i = 0; i < once.samples.size(); ++i)
            CHECK(std::abs(twice.samples[i] - once.samples[i]) < 1e-12);
    }
}

TEST_CASE("discretization convergence: doubling resolution moves smooth overlaps by < 1e-6") {
    const double waist = 1.4e-3 / std::sqrt(5.0);
    const double extent = 10.0 * waist * std::sqrt(5.0);
    const GridSpec coarse(256, extent), fine(512, extent);

    const auto overlap = [&](const GridSpec& grid) {
        return inner_product(evaluate_hg(2, 2, waist, grid), evaluate_hg(2, 0, waist, grid));
    };
    CHECK(std::abs(overlap(coarse) - overlap(fine)) < 1e-6);

    const auto self = [&](const GridSpec& grid) {
        const auto lg = evaluate_lg(2, 1, waist, grid);
        const auto hg = evaluate_hg(4, 0, waist, grid);
        return inner_product(hg, lg);
    };
    CHECK(std::abs(self(coarse) - self(fine)) < 1e-6);
}

TEST_CASE("field dump carries grid header and round-trips values") {
    const GridSpec grid(4, 1.0e-3);
    auto f = random_field(grid, 3);
    std::ostringstream out;
    write_field(out, f);
    std::istringstream in(out.str());

    std::string header;
    std::getline(in, header);
    CHECK(header.find("samples_per_axis=4") != std::string::npos);
    CHECK(header.find("physical_extent=0.001") != std::string::npos);

    for (int iy = 0; iy < 4; ++iy)
        for (int ix = 0; ix < 4; ++ix) {
            double re = 0.0, im = 0.0;
            in >> re >> im;
            CHECK(re == f.at(ix, iy).real());
            CHECK(im == f.at(ix, iy).imag());
        }
}
