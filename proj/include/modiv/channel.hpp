#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "modiv/grid.hpp"
#include "modiv/modes.hpp"
#include "modiv/parallel.hpp"
#include "modiv/rng.hpp"
#include "modiv/turbulence.hpp"

namespace modiv {

/// Complex coupling coefficient of one (launch, detect, screen) triple.
/// |gain| cannot exceed 1: it is a projection of a unit-power field onto a
/// unit-power mode.
struct ChannelGainSample {
    ModeSpec launch;
    ModeSpec detect;
    std::uint64_t screen_seed = 0;
    std::complex<double> gain;

    ChannelGainSample(const ModeSpec& l, const ModeSpec& d, std::uint64_t seed,
                      std::complex<double> h)
        : launch(l), detect(d), screen_seed(seed), gain(h) {
        if (std::abs(h) > 1.0 + 1e-9)
            throw std::invalid_argument("ChannelGainSample: |gain| exceeds unity");
    }
};

/// Thin-screen turbulence: per-pixel multiplication by exp(i * phase).
/// Unimodular, so total power is preserved.
inline ComplexField2D apply_screen(const ComplexField2D& f, const PhaseScreen& s) {
    if (f.grid != s.grid) throw std::invalid_argument("apply_screen: grid mismatch");
    ComplexField2D out(f.grid);
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
        const double p = s.phase[i];
        out.samples[i] = f.samples[i] * std::complex<double>(std::cos(p), std::sin(p));
    }
    return out;
}

/// Projection of an already-screened launch field onto a detection mode,
/// without materializing the intermediate field.
inline std::complex<double> coupling_gain(const ComplexField2D& launch,
                                          const ComplexField2D& detect, const PhaseScreen& screen) {
    if (launch.grid != detect.grid || launch.grid != screen.grid)
        throw std::invalid_argument("coupling_gain: grid mismatch");
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < launch.samples.size(); ++i) {
        const double p = screen.phase[i];
        acc += std::conj(detect.samples[i]) * launch.samples[i] *
               std::complex<double>(std::cos(p), std::sin(p));
    }
    const double pixel_area = launch.grid.pitch() * launch.grid.pitch();
    return acc * pixel_area;
}

/**
 * Complex channel gain h = <detect | screen * launch>: the simulated analogue
 * of the decomposition-hologram + pinhole + photodiode receiver, modelled as
 * an ideal match filter onto the conjugate detection mode.
 */
inline std::complex<double> coupling_gain(const ModeSpec& launch, const ModeSpec& detect,
                                          const PhaseScreen& screen, const GridSpec& grid) {
    return coupling_gain(evaluate_mode(launch, grid), evaluate_mode(detect, grid), screen);
}

/// Mean power crosstalk matrix: entry (i, j) = ensemble mean of
/// |<modes[j] | screen * modes[i]>|^2 over n_screens random screens.
struct CrosstalkMatrix {
    std::vector<ModeSpec> modes;
    std::vector<double> mean_power;  // row-major, row = launch index

    double at(int launch, int detect) const {
        return mean_power[static_cast<std::size_t>(launch) * modes.size() +
                          static_cast<std::size_t>(detect)];
    }
};

inline CrosstalkMatrix crosstalk_matrix(const std::vector<ModeSpec>& modes,
                                        const TurbulenceParams& params, int n_screens,
                                        std::uint64_t master_seed, int n_threads = 1) {
    if (modes.empty()) throw std::invalid_argument("crosstalk_matrix: no modes");
    if (n_screens < 1) throw std::invalid_argument("crosstalk_matrix: n_screens must be >= 1");

    const std::size_t count = modes.size();
    std::vector<ComplexField2D> fields;
    fields.reserve(count);
    for (const auto& spec : modes) fields.push_back(evaluate_mode(spec, params.grid));

    // per-screen slots keep the reduction order fixed regardless of threading
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(n_screens),
                                             std::vector<double>(count * count, 0.0));
    detail::parallel_for(n_screens, n_threads, [&](int s) {
        const PhaseScreen screen =
            generate_screen(params, derive_seed(master_seed, 0x73637265656eULL, s));
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t j = 0; j < count; ++j)
                partial[static_cast<std::size_t>(s)][i * count + j] =
                    std::norm(coupling_gain(fields[i], fields[j], screen));
    });

    CrosstalkMatrix result;
    result.modes = modes;
    result.mean_power.assign(count * count, 0.0);
    for (int s = 0; s < n_screens; ++s)
        for (std::size_t k = 0; k < count * count; ++k)
            result.mean_power[k] += partial[static_cast<std::size_t>(s)][k];
    for (auto& v : result.mean_power) v /= n_screens;
    return result;
}

/// CSV export with mode labels on the header row and first column.
inline void write_crosstalk_csv(std::ostream& out, const CrosstalkMatrix& matrix) {
    out << "launch\\detect";
    for (const auto& m : matrix.modes) out << ',' << mode_csv_label(m);
    out << '\n';
    for (std::size_t i = 0; i < matrix.modes.size(); ++i) {
        out << mode_csv_label(matrix.modes[i]);
        for (std::size_t j = 0; j < matrix.modes.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g",
                          matrix.mean_power[i * matrix.modes.size() + j]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

inline void write_crosstalk_csv(const std::filesystem::path& path, const CrosstalkMatrix& matrix) {
    auto out = detail::open_output(path);
    write_crosstalk_csv(out, matrix);
}

}  // namespace modiv
