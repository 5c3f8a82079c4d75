#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "modiv/grid.hpp"

namespace modiv {

enum class ModeFamily { hg, lg };

/**
 * Algebraic identifier of a waist-plane spatial mode.
 *
 * HG modes carry Cartesian indices (n, m): n counts nodes along x, m along y.
 * LG modes carry the azimuthal index l (any sign) and the radial index p >= 0.
 * All modes here live at z = 0 with waist radius w0.
 *
 * Convention note: the LG azimuthal phase is exp(-i * l * atan2(y, x)). With
 * this orientation the HG expansion of an LG mode has exactly the coefficients
 * i^k * b(n, m, k) produced by lg_as_hg_superposition(), with no extra phase.
 * A positive-l mode therefore advances in phase along the clockwise direction
 * of the (x right, y up) frame; ring_phase_winding() measures along that same
 * direction so its result equals l * 2 * pi.
 */
struct ModeSpec {
    ModeFamily family = ModeFamily::hg;
    int index1 = 0;    ///< HG: n; LG: l
    int index2 = 0;    ///< HG: m; LG: p
    double waist = 0;  ///< w0 [m]

    static ModeSpec hg(int n, int m, double waist) {
        if (n < 0 || m < 0) throw std::invalid_argument("ModeSpec: HG indices must be >= 0");
        if (!(waist > 0.0)) throw std::invalid_argument("ModeSpec: waist must be positive");
        return ModeSpec{ModeFamily::hg, n, m, waist};
    }

    static ModeSpec lg(int l, int p, double waist) {
        if (p < 0) throw std::invalid_argument("ModeSpec: LG radial index must be >= 0");
        if (!(waist > 0.0)) throw std::invalid_argument("ModeSpec: waist must be positive");
        return ModeSpec{ModeFamily::lg, l, p, waist};
    }

    bool operator==(const ModeSpec&) const = default;
};

/// Mode order N: n + m for HG, 2p + |l| for LG. Equal-order modes span the
/// same subspace and are related by a unitary basis change.
inline int mode_order(const ModeSpec& spec) {
    if (spec.family == ModeFamily::hg) return spec.index1 + spec.index2;
    return 2 * spec.index2 + std::abs(spec.index1);
}

/// Compact label, e.g. "HG22", "LG21". Used for CSV column names.
inline std::string mode_label(const ModeSpec& spec) {
    const char* fam = spec.family == ModeFamily::hg ? "HG" : "LG";
    return fam + std::to_string(spec.index1) + std::to_string(spec.index2);
}

/// Underscored label, e.g. "HG_2_2". Used for crosstalk matrix headers.
inline std::string mode_csv_label(const ModeSpec& spec) {
    const char* fam = spec.family == ModeFamily::hg ? "HG" : "LG";
    return fam + ("_" + std::to_string(spec.index1)) + "_" + std::to_string(spec.index2);
}

/// Inverts l = n - m, p = min(n, m): the unique HG index pair matching an LG
/// mode of the same order.
inline std::pair<int, int> lg_to_hg_indices(int l, int p) {
    if (p < 0) throw std::invalid_argument("lg_to_hg_indices: p must be >= 0");
    if (l >= 0) return {p + l, p};
    return {p, p - l};
}

namespace detail {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double value = 1.0;
    for (int i = 1; i <= k; ++i) value = value * (n - k + i) / i;
    return value;
}

/// Coefficient of t^k in (1 - t)^n (1 + t)^m, i.e. (1/k!) d^k/dt^k at t = 0.
inline double expansion_polynomial_coefficient(int n, int m, int k) {
    double acc = 0.0;
    const int j_lo = std::max(0, k - m);
    const int j_hi = std::min(n, k);
    for (int j = j_lo; j <= j_hi; ++j) {
        const double term = binomial(n, j) * binomial(m, k - j);
        acc += (j % 2 == 0) ? term : -term;
    }
    return acc;
}

}  // namespace detail

/**
 * Real transform coefficient b(n, m, k) of the HG <-> LG basis change:
 *
 *   b(n, m, k) = sqrt((N-k)! k! / (2^N n! m!)) * [t^k] (1 - t)^n (1 + t)^m
 *
 * where N = n + m and [t^k] extracts the Taylor coefficient (equivalently
 * (1/k!) times the k-th derivative at t = 0). The vector b(n, m, .) is a unit
 * vector: sum_k b^2 = 1.
 */
inline double transform_coefficient(int n, int m, int k) {
    if (n < 0 || m < 0) throw std::invalid_argument("transform_coefficient: indices must be >= 0");
    const int order = n + m;
    if (k < 0 || k > order)
        throw std::invalid_argument("transform_coefficient: k must satisfy 0 <= k <= n + m, got " +
                                    std::to_string(k));
    const double log_norm = 0.5 * (std::lgamma(order - k + 1.0) + std::lgamma(k + 1.0) -
                                   order * std::numbers::ln2 - std::lgamma(n + 1.0) -
                                   std::lgamma(m + 1.0));
    return std::exp(log_norm) * detail::expansion_polynomial_coefficient(n, m, k);
}

/**
 * An order-N mode written in the HG basis: coefficients[k] multiplies
 * HG_{N-k, k}. Unit norm by construction of the basis change.
 */
struct HgExpansion {
    int order = 0;
    std::vector<std::complex<double>> coefficients;
};

/// HG-basis expansion of LG(l, p): coefficients c_k = i^k * b(n, m, k) with
/// (n, m) = lg_to_hg_indices(l, p).
inline HgExpansion lg_as_hg_superposition(int l, int p) {
    const auto [n, m] = lg_to_hg_indices(l, p);
    const int order = n + m;
    HgExpansion expansion;
    expansion.order = order;
    expansion.coefficients.resize(static_cast<std::size_t>(order) + 1);
    static constexpr std::complex<double> i_powers[4] = {
        {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    for (int k = 0; k <= order; ++k)
        expansion.coefficients[static_cast<std::size_t>(k)] =
            i_powers[k % 4] * transform_coefficient(n, m, k);
    return expansion;
}

namespace detail {

/// Normalized harmonic-oscillator functions psi_0..psi_n at xi, stable
/// three-term recurrence (no factorials, no overflow for large n).
inline void hermite_functions(int n_max, double xi, double* out) {
    constexpr double pi_quarter = 0.7511255444649425;  // pi^(-1/4)
    const double gauss = std::exp(-0.5 * xi * xi);
    out[0] = pi_quarter * gauss;
    if (n_max == 0) return;
    out[1] = std::numbers::sqrt2 * xi * out[0];
    for (int k = 1; k < n_max; ++k)
        out[k + 1] = (std::sqrt(2.0 / (k + 1.0)) * xi) * out[k] -
                     std::sqrt(k / (k + 1.0)) * out[k - 1];
}

/// Associated Laguerre L_p^alpha(u) by upward recurrence.
inline double laguerre(int p, int alpha, double u) {
    if (p == 0) return 1.0;
    double lm1 = 1.0;
    double l = 1.0 + alpha - u;
    for (int k = 1; k < p; ++k) {
        const double lp1 = ((2.0 * k + 1.0 + alpha - u) * l - (k + alpha) * lm1) / (k + 1.0);
        lm1 = l;
        l = lp1;
    }
    return l;
}

inline void check_mode_fits(int order, double waist, const GridSpec& grid, const char* what) {
    // second-moment diameter of an order-N mode
    const double diameter = 2.0 * waist * std::sqrt(order + 1.0);
    if (diameter > grid.physical_extent / 3.0)
        throw std::invalid_argument(std::string(what) +
                                    ": mode too large for grid; requires physical_extent >= " +
                                    format_double(3.0 * diameter) + " m, got " +
                                    format_double(grid.physical_extent) + " m");
}

}  // namespace detail

/**
 * Waist-plane HG_n^m profile, numerically normalized to unit power on the
 * grid. Real valued; parity under x -> -x is (-1)^n and under y -> -y is
 * (-1)^m.
 */
inline ComplexField2D evaluate_hg(int n, int m, double waist, const GridSpec& grid) {
    if (n < 0 || m < 0) throw std::invalid_argument("evaluate_hg: indices must be >= 0");
    if (!(waist > 0.0)) throw std::invalid_argument("evaluate_hg: waist must be positive");
    detail::check_mode_fits(n + m, waist, grid, "evaluate_hg");

    const int count = grid.samples_per_axis;
    const double scale = std::numbers::sqrt2 / waist;
    std::vector<double> work(static_cast<std::size_t>(std::max(n, m)) + 1);
    std::vector<double> ux(static_cast<std::size_t>(count)), uy(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double xi = scale * grid.coordinate(i);
        detail::hermite_functions(std::max(n, m), xi, work.data());
        ux[static_cast<std::size_t>(i)] = work[static_cast<std::size_t>(n)];
        uy[static_cast<std::size_t>(i)] = work[static_cast<std::size_t>(m)];
    }
    ComplexField2D field(grid);
    for (int iy = 0; iy < count; ++iy)
        for (int ix = 0; ix < count; ++ix)
            field.at(ix, iy) = ux[static_cast<std::size_t>(ix)] * uy[static_cast<std::size_t>(iy)];
    return normalize(field);
}

/**
 * Waist-plane LG_l^p profile, numerically normalized to unit power.
 *
 * Definition used (see the convention note on ModeSpec):
 *
 *   LG_{l,p}(r, phi) = (-1)^p sqrt(2 p! / (pi (p+|l|)!)) / w0
 *                      * (sqrt(2) r / w0)^|l| L_p^{|l|}(2 r^2 / w0^2)
 *                      * exp(-r^2 / w0^2) exp(-i l phi)
 *
 * The (-1)^p factor and the azimuthal sign make the HG expansion identity
 * hold pixel for pixel with the lg_as_hg_superposition() coefficients.
 */
inline ComplexField2D evaluate_lg(int l, int p, double waist, const GridSpec& grid) {
    if (p < 0) throw std::invalid_argument("evaluate_lg: radial index must be >= 0");
    if (!(waist > 0.0)) throw std::invalid_argument("evaluate_lg: waist must be positive");
    const int abs_l = std::abs(l);
    const int order = 2 * p + abs_l;
    detail::check_mode_fits(order, waist, grid, "evaluate_lg");

    const int count = grid.samples_per_axis;
    const double log_amp = 0.5 * (std::numbers::ln2 - std::log(std::numbers::pi) +
                                  std::lgamma(p + 1.0) - std::lgamma(p + abs_l + 1.0));
    const double amplitude = ((p % 2 == 0) ? 1.0 : -1.0) * std::exp(log_amp) / waist;

    ComplexField2D field(grid);
    for (int iy = 0; iy < count; ++iy) {
        const double y = grid.coordinate(iy);
        for (int ix = 0; ix < count; ++ix) {
            const double x = grid.coordinate(ix);
            const double r2 = x * x + y * y;
            const double u = 2.0 * r2 / (waist * waist);
            double radial = amplitude * detail::laguerre(p, abs_l, u) * std::exp(-0.5 * u);
            if (abs_l > 0) radial *= std::pow(std::sqrt(u), abs_l);
            if (l != 0 && r2 > 0.0) {
                const double angle = -l * std::atan2(y, x);
                field.at(ix, iy) = radial * std::complex<double>(std::cos(angle), std::sin(angle));
            } else {
                field.at(ix, iy) = radial;
            }
        }
    }
    return normalize(field);
}

/// Evaluates a mode identified by a ModeSpec.
inline ComplexField2D evaluate_mode(const ModeSpec& spec, const GridSpec& grid) {
    if (spec.family == ModeFamily::hg)
        return evaluate_hg(spec.index1, spec.index2, spec.waist, grid);
    return evaluate_lg(spec.index1, spec.index2, spec.waist, grid);
}

/// Synthesizes sum_k c_k HG_{N-k,k} on the grid. Near-zero coefficients are
/// skipped.
inline ComplexField2D evaluate_expansion(const HgExpansion& expansion, double waist,
                                         const GridSpec& grid) {
    ComplexField2D acc(grid);
    for (int k = 0; k <= expansion.order; ++k) {
        const auto c = expansion.coefficients[static_cast<std::size_t>(k)];
        if (std::abs(c) < 1e-15) continue;
        const ComplexField2D term = evaluate_hg(expansion.order - k, k, waist, grid);
        for (std::size_t i = 0; i < acc.samples.size(); ++i) acc.samples[i] += c * term.samples[i];
    }
    return acc;
}

namespace detail {

inline std::complex<double> bilinear_sample(const ComplexField2D& f, double x, double y) {
    const int n = f.grid.samples_per_axis;
    const double pitch = f.grid.pitch();
    const double gx = (x + 0.5 * f.grid.physical_extent) / pitch - 0.5;
    const double gy = (y + 0.5 * f.grid.physical_extent) / pitch - 0.5;
    const int ix = std::clamp(static_cast<int>(std::floor(gx)), 0, n - 2);
    const int iy = std::clamp(static_cast<int>(std::floor(gy)), 0, n - 2);
    const double tx = gx - ix;
    const double ty = gy - iy;
    return (1 - tx) * (1 - ty) * f.at(ix, iy) + tx * (1 - ty) * f.at(ix + 1, iy) +
           (1 - tx) * ty * f.at(ix, iy + 1) + tx * ty * f.at(ix + 1, iy + 1);
}

}  // namespace detail

/**
 * Total phase accumulated around a centred ring of the given radius,
 * traversed in the direction along which positive-l LG modes advance in
 * phase (see ModeSpec). For evaluate_lg(l, p) at a bright-ring radius the
 * result is l * 2 * pi up to discretization error.
 */
inline double ring_phase_winding(const ComplexField2D& field, double radius, int samples = 1440) {
    if (!(radius > 0.0) || radius >= 0.5 * field.grid.physical_extent)
        throw std::invalid_argument("ring_phase_winding: radius outside grid");
    double winding = 0.0;
    std::complex<double> previous =
        detail::bilinear_sample(field, radius, 0.0);
    for (int k = 1; k <= samples; ++k) {
        const double t = 2.0 * std::numbers::pi * k / samples;
        // clockwise traversal of the (x right, y up) frame
        const std::complex<double> current =
            detail::bilinear_sample(field, radius * std::cos(t), -radius * std::sin(t));
        winding += std::arg(current * std::conj(previous));
        previous = current;
    }
    return winding;
}

/// Radius of the outermost bright ring (outermost local maximum of the
/// azimuthally averaged intensity).
inline double outer_ring_radius(const ComplexField2D& field) {
    const int n = field.grid.samples_per_axis;
    const double pitch = field.grid.pitch();
    const int bins = n / 2;
    std::vector<double> intensity(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> hits(static_cast<std::size_t>(bins), 0);
    for (int iy = 0; iy < n; ++iy) {
        const double y = field.grid.coordinate(iy);
        for (int ix = 0; ix < n; ++ix) {
            const double x = field.grid.coordinate(ix);
            const int bin = static_cast<int>(std::hypot(x, y) / pitch);
            if (bin >= bins) continue;
            intensity[static_cast<std::size_t>(bin)] += std::norm(field.at(ix, iy));
            ++hits[static_cast<std::size_t>(bin)];
        }
    }
    for (int b = 0; b < bins; ++b)
        if (hits[static_cast<std::size_t>(b)] > 0)
            intensity[static_cast<std::size_t>(b)] /= hits[static_cast<std::size_t>(b)];
    const double peak = *std::max_element(intensity.begin(), intensity.end());
    int outer = -1;
    for (int b = 1; b + 1 < bins; ++b) {
        if (intensity[static_cast<std::size_t>(b)] < 0.01 * peak) continue;
        if (intensity[static_cast<std::size_t>(b)] >= intensity[static_cast<std::size_t>(b - 1)] &&
            intensity[static_cast<std::size_t>(b)] > intensity[static_cast<std::size_t>(b + 1)])
            outer = b;
    }
    if (outer < 0) throw std::runtime_error("outer_ring_radius: no ring found");
    return (outer + 0.5) * pitch;
}

}  // namespace modiv
