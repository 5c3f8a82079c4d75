#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace modiv {

/**
 * Uniform square sampling window for scalar optical fields.
 *
 * Pixels are centred: coordinate(i) = (i + 0.5) * pitch - extent / 2, so the
 * grid is symmetric about the optical axis for any even sample count.
 */
struct GridSpec {
    int samples_per_axis = 256;
    double physical_extent = 0.0;  ///< full side length of the window [m]

    GridSpec() = default;

    GridSpec(int n, double extent) : samples_per_axis(n), physical_extent(extent) {
        if (n < 2 || n % 2 != 0)
            throw std::invalid_argument("GridSpec: samples_per_axis must be even and >= 2, got " +
                                        std::to_string(n));
        if (!(extent > 0.0))
            throw std::invalid_argument("GridSpec: physical_extent must be positive");
    }

    double pitch() const { return physical_extent / samples_per_axis; }

    /// Physical coordinate of pixel centre i along either axis.
    double coordinate(int i) const { return (i + 0.5) * pitch() - 0.5 * physical_extent; }

    int pixel_count() const { return samples_per_axis * samples_per_axis; }

    bool operator==(const GridSpec&) const = default;
};

/**
 * Sampled complex amplitude on a GridSpec, row-major with index iy * n + ix.
 * Amplitude squared integrates (pixel-area weighted) to optical power.
 *
 * Fields are treated as immutable values after construction; every operation
 * below returns a new field, so instances can be shared across threads.
 */
struct ComplexField2D {
    GridSpec grid;
    std::vector<std::complex<double>> samples;

    ComplexField2D() = default;

    explicit ComplexField2D(const GridSpec& g)
        : grid(g), samples(static_cast<std::size_t>(g.pixel_count())) {}

    ComplexField2D(const GridSpec& g, std::vector<std::complex<double>> values)
        : grid(g), samples(std::move(values)) {
        if (samples.size() != static_cast<std::size_t>(g.pixel_count()))
            throw std::invalid_argument("ComplexField2D: sample count does not match grid");
    }

    std::complex<double>& at(int ix, int iy) {
        return samples[static_cast<std::size_t>(iy) * grid.samples_per_axis + ix];
    }
    const std::complex<double>& at(int ix, int iy) const {
        return samples[static_cast<std::size_t>(iy) * grid.samples_per_axis + ix];
    }

    bool all_finite() const {
        for (const auto& v : samples)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

/**
 * Discrete overlap integral  sum conj(a) * b * pixel_area.
 *
 * Pixel-area weighting makes the value grid-resolution independent for well
 * sampled fields. Conjugate-symmetric: inner_product(a, b) == conj(inner_product(b, a)).
 */
inline std::complex<double> inner_product(const ComplexField2D& a, const ComplexField2D& b) {
    if (a.grid != b.grid)
        throw std::invalid_argument("inner_product: fields live on different grids");
    std::complex<double> acc(0.0, 0.0);
    const std::size_t count = a.samples.size();
    for (std::size_t i = 0; i < count; ++i) acc += std::conj(a.samples[i]) * b.samples[i];
    const double pixel_area = a.grid.pitch() * a.grid.pitch();
    return acc * pixel_area;
}

/// Total optical power, the real part of the self overlap. Non-negative.
inline double total_power(const ComplexField2D& f) { return inner_product(f, f).real(); }

inline ComplexField2D scaled(const ComplexField2D& f, std::complex<double> factor) {
    ComplexField2D out(f.grid);
    for (std::size_t i = 0; i < f.samples.size(); ++i) out.samples[i] = f.samples[i] * factor;
    return out;
}

/// Rescales to unit power. A zero-power field is rejected rather than turned
/// into NaNs.
inline ComplexField2D normalize(const ComplexField2D& f) {
    const double power = total_power(f);
    if (!(power > 0.0))
        throw std::invalid_argument("normalize: field has zero power");
    return scaled(f, 1.0 / std::sqrt(power));
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    return out;
}

}  // namespace detail

/**
 * Debug/plot dump: one header line with the grid parameters, then one row of
 * (re, im) pairs per grid row.
 */
inline void write_field(std::ostream& out, const ComplexField2D& f) {
    const int n = f.grid.samples_per_axis;
    out << "# samples_per_axis=" << n
        << " physical_extent=" << detail::format_double(f.grid.physical_extent) << "\n";
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const auto& v = f.at(ix, iy);
            out << detail::format_double(v.real()) << ' ' << detail::format_double(v.imag());
            out << (ix + 1 == n ? '\n' : ' ');
        }
    }
}

inline void write_field(const std::filesystem::path& path, const ComplexField2D& f) {
    auto out = detail::open_output(path);
    write_field(out, f);
}

}  // namespace modiv
