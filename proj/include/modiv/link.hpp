#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "modiv/channel.hpp"
#include "modiv/modes.hpp"
#include "modiv/parallel.hpp"
#include "modiv/rng.hpp"
#include "modiv/turbulence.hpp"

namespace modiv {

/// How the single photodiode combines the co-propagating arms.
/// IncoherentPower sums per-arm detected powers (the equal-gain-combining
/// default); CoherentField squares the weighted field sum, which keeps the
/// cross-arm interference terms. The experimental receiver leaves this
/// ambiguous, so both are exposed.
enum class CombineMode { IncoherentPower, CoherentField };

struct LinkArm {
    ModeSpec launch;
    double weight = 1.0;  ///< transmitted intensity share g_i
};

/**
 * Full configuration of one OOK link Monte Carlo. The arm weights must sum to
 * one: diversity splits the same total intensity across the arms, so any BER
 * improvement is a diversity gain and not a power increase.
 */
struct LinkConfig {
    std::vector<LinkArm> arms;
    double receiver_sensitivity = 1.0;  ///< r in the received-signal model
    double noise_sigma = 0.0;           ///< AWGN std dev in detected-power units
    double threshold_fraction = 0.5;    ///< decision level as a fraction of the
                                        ///< unfaded one-level
    int bits_per_screen = 10000;
    int n_screens = 256;
    std::uint64_t master_seed = 1;
    TurbulenceParams turbulence;
    CombineMode combine = CombineMode::IncoherentPower;

    void validate() const {
        if (arms.empty()) throw std::invalid_argument("LinkConfig: no arms");
        double total = 0.0;
        for (const auto& arm : arms) {
            if (arm.weight < 0.0) throw std::invalid_argument("LinkConfig: negative arm weight");
            total += arm.weight;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("LinkConfig: arm weights must sum to 1");
        if (!(receiver_sensitivity > 0.0))
            throw std::invalid_argument("LinkConfig: receiver_sensitivity must be positive");
        if (noise_sigma < 0.0) throw std::invalid_argument("LinkConfig: negative noise_sigma");
        if (!(threshold_fraction > 0.0) || !(threshold_fraction < 1.0))
            throw std::invalid_argument("LinkConfig: threshold_fraction must be in (0, 1)");
        if (bits_per_screen < 1) throw std::invalid_argument("LinkConfig: bits_per_screen < 1");
        if (n_screens < 1) throw std::invalid_argument("LinkConfig: n_screens < 1");
    }
};

/// Which receiver a Monte Carlo run reports: one SISO arm or the diversity
/// combiner.
struct ModeSelection {
    enum class Kind { Siso, Diversity } kind = Kind::Diversity;
    std::size_t arm = 0;

    static ModeSelection siso(std::size_t arm) { return {Kind::Siso, arm}; }
    static ModeSelection diversity() { return {Kind::Diversity, 0}; }
};

/// Per-r0 BER estimates. ber_per_arm holds each SISO arm at full transmit
/// intensity; ber_diversity is the combiner with the configured weights.
/// Entries are NaN when the corresponding receiver was not simulated.
struct BerResult {
    double r0 = 0.0;
    std::vector<double> ber_per_arm;
    double ber_diversity = std::nan("");
    std::int64_t bits_tested = 0;
    int screens_used = 0;

    std::vector<std::int64_t> errors_per_arm;
    std::int64_t errors_diversity = 0;
};

/// Per-arm mean coupling powers and screen-level error bars, reported
/// alongside every BER.
struct PointDiagnostics {
    std::vector<double> mean_self_power;  ///< mean |h_ii|^2 per arm
    double mean_leak_power = 0.0;         ///< mean cross-arm |h_ij|^2, i != j
    std::vector<double> ber_err3s;        ///< 3 sigma of the BER estimate, SISO arms then diversity
};

/// OOK-NRZ at one sample per bit is the identity map onto {0,1} symbols.
inline std::vector<int> modulate_ook(const std::vector<int>& bits) {
    for (int b : bits)
        if (b != 0 && b != 1) throw std::invalid_argument("modulate_ook: bits must be 0 or 1");
    return bits;
}

/// Received signal y = r * (combined arm power) * symbol + noise.
inline double received_power(int symbol, const std::vector<std::complex<double>>& gains,
                             const LinkConfig& config, double noise_sample) {
    if (gains.size() != config.arms.size())
        throw std::invalid_argument("received_power: gain count does not match arm count");
    double combined = 0.0;
    if (config.combine == CombineMode::IncoherentPower) {
        for (std::size_t i = 0; i < gains.size(); ++i)
            combined += config.arms[i].weight * std::norm(gains[i]);
    } else {
        std::complex<double> field(0.0, 0.0);
        for (std::size_t i = 0; i < gains.size(); ++i)
            field += std::sqrt(config.arms[i].weight) * gains[i];
        combined = std::norm(field);
    }
    return config.receiver_sensitivity * combined * symbol + noise_sample;
}

/// Unfaded received power for symbol 1 (all gains at their no-turbulence
/// values); the detection threshold is threshold_fraction times this.
inline double unfaded_reference_power(const LinkConfig& config) {
    std::vector<std::complex<double>> unit(config.arms.size(), {1.0, 0.0});
    return received_power(1, unit, config, 0.0);
}

/// Threshold detector: 1 iff y >= threshold_fraction * reference_power.
inline int detect(double y, const LinkConfig& config, double reference_power) {
    return y >= config.threshold_fraction * reference_power ? 1 : 0;
}

inline int detect(double y, const LinkConfig& config) {
    return detect(y, config, unfaded_reference_power(config));
}

/// Diversity error bound for statistically independent channels: the joint
/// error probability is the product of the per-channel ones.
inline double diversity_error_product(const std::vector<double>& pe) {
    double product = 1.0;
    for (double p : pe) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("diversity_error_product: probability outside [0, 1]");
        product *= p;
    }
    return product;
}

namespace detail {

constexpr std::uint64_t kScreenSalt = 0x73637265656eULL;  // screen streams
constexpr std::uint64_t kBitSalt = 0x62697473ULL;         // bit/noise streams

struct ScreenTally {
    std::vector<std::int64_t> errors;  // one per receiver: SISO arms then diversity
    std::vector<double> self_power;    // |h_ii|^2 per arm
    double leak_power = 0.0;           // mean cross-arm |h_ij|^2
};

/// Combined detected power of each receiver for symbol 1, given per-arm
/// self-gains. Receivers are the SISO arms (unit weight) then the combiner.
inline std::vector<double> receiver_powers(const LinkConfig& config,
                                           const std::vector<std::complex<double>>& self) {
    const std::size_t n_arms = config.arms.size();
    std::vector<double> powers(n_arms + 1);
    for (std::size_t a = 0; a < n_arms; ++a) powers[a] = std::norm(self[a]);
    if (config.combine == CombineMode::IncoherentPower) {
        double combined = 0.0;
        for (std::size_t a = 0; a < n_arms; ++a) combined += config.arms[a].weight * powers[a];
        powers[n_arms] = combined;
    } else {
        std::complex<double> field(0.0, 0.0);
        for (std::size_t a = 0; a < n_arms; ++a)
            field += std::sqrt(config.arms[a].weight) * self[a];
        powers[n_arms] = std::norm(field);
    }
    return powers;
}

/// Bit-level engine for one screen. Every receiver sees the same bits and the
/// same noise sample, which pairs the SISO/diversity comparison screen by
/// screen.
inline void count_bit_errors(const std::vector<double>& powers,
                             const std::vector<double>& thresholds, double sensitivity,
                             double noise_sigma, int bits, RandomStream& rng,
                             std::int64_t* errors) {
    for (int b = 0; b < bits; ++b) {
        const int bit = rng.bit();
        const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
        for (std::size_t k = 0; k < powers.size(); ++k) {
            const double y = sensitivity * powers[k] * bit + noise;
            const int decided = y >= thresholds[k] ? 1 : 0;
            errors[k] += decided != bit;
        }
    }
}

/// Runs the per-screen Monte Carlo. Screens are independent work items with
/// index-derived seeds and per-index result slots, so any thread count yields
/// the same tallies.
inline std::vector<ScreenTally> run_screens(const LinkConfig& config,
                                            const std::vector<ComplexField2D>& arm_fields,
                                            int n_threads) {
    const std::size_t n_arms = config.arms.size();
    const std::size_t n_receivers = n_arms + 1;

    // no-turbulence self-couplings fix the decision thresholds
    std::vector<std::complex<double>> unfaded(n_arms);
    for (std::size_t a = 0; a < n_arms; ++a)
        unfaded[a] = inner_product(arm_fields[a], arm_fields[a]);
    const std::vector<double> reference = receiver_powers(config, unfaded);
    std::vector<double> thresholds(n_receivers);
    for (std::size_t k = 0; k < n_receivers; ++k)
        thresholds[k] =
            config.threshold_fraction * config.receiver_sensitivity * reference[k];

    std::vector<ScreenTally> tallies(static_cast<std::size_t>(config.n_screens));
    parallel_for(config.n_screens, n_threads, [&](int s) {
        const PhaseScreen screen = generate_screen(
            config.turbulence, derive_seed(config.master_seed, kScreenSalt, s));

        std::vector<std::complex<double>> self(n_arms);
        double leak = 0.0;
        int leak_terms = 0;
        for (std::size_t detect_idx = 0; detect_idx < n_arms; ++detect_idx) {
            for (std::size_t launch_idx = 0; launch_idx < n_arms; ++launch_idx) {
                const std::complex<double> h =
                    coupling_gain(arm_fields[launch_idx], arm_fields[detect_idx], screen);
                if (detect_idx == launch_idx) {
                    self[detect_idx] = h;
                } else {
                    // cross-arm leakage: tracked but excluded from the default
                    // detected power
                    leak += std::norm(h);
                    ++leak_terms;
                }
            }
        }

        ScreenTally tally;
        tally.self_power.resize(n_arms);
        const std::vector<double> powers = receiver_powers(config, self);
        for (std::size_t a = 0; a < n_arms; ++a) tally.self_power[a] = powers[a];
        tally.leak_power = leak_terms > 0 ? leak / leak_terms : 0.0;
        tally.errors.assign(n_receivers, 0);

        RandomStream bit_rng(derive_seed(config.master_seed, kBitSalt, s));
        count_bit_errors(powers, thresholds, config.receiver_sensitivity, config.noise_sigma,
                         config.bits_per_screen, bit_rng, tally.errors.data());
        tallies[static_cast<std::size_t>(s)] = std::move(tally);
    });
    return tallies;
}

}  // namespace detail

/**
 * Quasi-static fading Monte Carlo at one turbulence strength: per screen the
 * coupling gains are drawn once (turbulence evolves far slower than the bit
 * rate), then bits_per_screen fair bits run through every receiver with fresh
 * AWGN per bit. Reports each SISO arm and the diversity combiner in one pass
 * over the shared screen ensemble. Deterministic for a given master_seed,
 * independent of n_threads.
 */
inline BerResult simulate_point(const LinkConfig& config,
                                const std::vector<ComplexField2D>& arm_fields, int n_threads = 1,
                                PointDiagnostics* diagnostics = nullptr) {
    config.validate();
    if (arm_fields.size() != config.arms.size())
        throw std::invalid_argument("simulate_point: field count does not match arm count");

    const std::size_t n_arms = config.arms.size();
    const std::vector<detail::ScreenTally> tallies =
        detail::run_screens(config, arm_fields, n_threads);

    BerResult result;
    result.r0 = config.turbulence.r0;
    result.screens_used = config.n_screens;
    result.bits_tested = static_cast<std::int64_t>(config.n_screens) * config.bits_per_screen;
    result.errors_per_arm.assign(n_arms, 0);
    for (const auto& tally : tallies) {
        for (std::size_t a = 0; a < n_arms; ++a) result.errors_per_arm[a] += tally.errors[a];
        result.errors_diversity += tally.errors[n_arms];
    }
    result.ber_per_arm.resize(n_arms);
    for (std::size_t a = 0; a < n_arms; ++a)
        result.ber_per_arm[a] = static_cast<double>(result.errors_per_arm[a]) / result.bits_tested;
    result.ber_diversity = static_cast<double>(result.errors_diversity) / result.bits_tested;

    if (diagnostics) {
        diagnostics->mean_self_power.assign(n_arms, 0.0);
        diagnostics->mean_leak_power = 0.0;
        diagnostics->ber_err3s.assign(n_arms + 1, 0.0);
        const double n_screens = static_cast<double>(config.n_screens);
        for (const auto& tally : tallies) {
            for (std::size_t a = 0; a < n_arms; ++a)
                diagnostics->mean_self_power[a] += tally.self_power[a];
            diagnostics->mean_leak_power += tally.leak_power;
        }
        for (auto& v : diagnostics->mean_self_power) v /= n_screens;
        diagnostics->mean_leak_power /= n_screens;
        // screen-level spread: bits within a screen share one fading state,
        // so the honest error bar comes from the per-screen BER variance
        for (std::size_t k = 0; k <= n_arms; ++k) {
            double mean = 0.0;
            for (const auto& tally : tallies)
                mean += static_cast<double>(tally.errors[k]) / config.bits_per_screen;
            mean /= n_screens;
            double var = 0.0;
            for (const auto& tally : tallies) {
                const double d =
                    static_cast<double>(tally.errors[k]) / config.bits_per_screen - mean;
                var += d * d;
            }
            var = n_screens > 1 ? var / (n_screens - 1.0) : 0.0;
            diagnostics->ber_err3s[k] = 3.0 * std::sqrt(var / n_screens);
        }
    }
    return result;
}

inline BerResult simulate_point(const LinkConfig& config, int n_threads = 1,
                                PointDiagnostics* diagnostics = nullptr) {
    config.validate();
    std::vector<ComplexField2D> fields;
    fields.reserve(config.arms.size());
    for (const auto& arm : config.arms)
        fields.push_back(evaluate_mode(arm.launch, config.turbulence.grid));
    return simulate_point(config, fields, n_threads, diagnostics);
}

/**
 * Single-receiver entry point: reports either one SISO arm (that arm at full
 * unit intensity) or the diversity combiner. Shares the screen ensemble with
 * every other selection under the same master_seed.
 */
inline BerResult ber_monte_carlo(const LinkConfig& config, const ModeSelection& selection,
                                 int n_threads = 1) {
    config.validate();
    if (selection.kind == ModeSelection::Kind::Siso && selection.arm >= config.arms.size())
        throw std::invalid_argument("ber_monte_carlo: SISO arm index out of range");
    const BerResult full = simulate_point(config, n_threads);
    BerResult result;
    result.r0 = full.r0;
    result.bits_tested = full.bits_tested;
    result.screens_used = full.screens_used;
    if (selection.kind == ModeSelection::Kind::Siso) {
        result.ber_per_arm.assign(config.arms.size(), std::nan(""));
        result.errors_per_arm.assign(config.arms.size(), 0);
        result.ber_per_arm[selection.arm] = full.ber_per_arm[selection.arm];
        result.errors_per_arm[selection.arm] = full.errors_per_arm[selection.arm];
    } else {
        result.ber_diversity = full.ber_diversity;
        result.errors_diversity = full.errors_diversity;
    }
    return result;
}

}  // namespace modiv
