#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorafp/rng.hpp"
#include "lorafp/signal.hpp"

// LoRa chirp-spread-spectrum synthesis at the capture sample rate. Symbols are
// cyclic shifts of the base linear up-chirp; a symbol s starts its sweep at
// -BW/2 + s*BW/2^SF and wraps from +BW/2 back to -BW/2 partway through.

namespace lorafp {

struct CodingRate {
    int numerator = 4;
    int denominator = 5;

    double fraction() const {
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }
    std::string str() const {
        return std::to_string(numerator) + "/" + std::to_string(denominator);
    }
};

struct LoRaConfig {
    int spreading_factor = 7;
    double bandwidth_hz = 125000.0;
    int preamble_symbols = 8;
    CodingRate coding_rate{4, 5};
    double tx_power_dbm = 20.0;  // metadata only

    int chips_per_symbol() const { return 1 << spreading_factor; }
    double symbol_duration_s() const {
        return static_cast<double>(chips_per_symbol()) / bandwidth_hz;
    }

    void validate() const {
        if (spreading_factor < 7 || spreading_factor > 12)
            throw std::invalid_argument("LoRaConfig: spreading factor must be in [7,12]");
        if (!(bandwidth_hz > 0.0))
            throw std::invalid_argument("LoRaConfig: bandwidth must be positive");
        if (preamble_symbols < 0)
            throw std::invalid_argument("LoRaConfig: preamble symbol count must be >= 0");
        if (coding_rate.numerator != 4 || coding_rate.denominator < 5 ||
            coding_rate.denominator > 8)
            throw std::invalid_argument("LoRaConfig: coding rate must be 4/5..4/8");
    }
};

struct SymbolStream {
    std::vector<int> symbols;
    std::uint64_t rng_seed = 0;
};

// Random payload of `count` symbols, all below 2^SF.
inline SymbolStream random_symbols(const LoRaConfig& cfg, int count, std::uint64_t seed) {
    SymbolStream st;
    st.rng_seed = seed;
    st.symbols.reserve(static_cast<std::size_t>(count));
    Rng rng(seed);
    for (int i = 0; i < count; ++i)
        st.symbols.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.chips_per_symbol()))));
    return st;
}

// Raw bit rate SF * BW / 2^SF * CR. The paper's configuration table quotes
// these rounded to integer bps (5470 for SF7 is their display rounding of
// 5468.75).
inline double bit_rate(const LoRaConfig& cfg) {
    cfg.validate();
    return cfg.spreading_factor * cfg.bandwidth_hz /
           static_cast<double>(cfg.chips_per_symbol()) * cfg.coding_rate.fraction();
}

// One CSS symbol as a unit-magnitude complex exponential. The instantaneous
// frequency ramps at BW^2/2^SF Hz/s from -BW/2 + symbol*BW/2^SF and wraps to
// -BW/2 once it reaches +BW/2; phase is continuous through the wrap and zero
// at the first sample.
inline ComplexSampleBuffer synthesize_chirp(const LoRaConfig& cfg, int symbol,
                                            double sample_rate_hz) {
    cfg.validate();
    if (symbol < 0 || symbol >= cfg.chips_per_symbol())
        throw std::invalid_argument("synthesize_chirp: symbol out of range");
    if (sample_rate_hz < cfg.bandwidth_hz)
        throw std::invalid_argument("synthesize_chirp: sample rate below bandwidth");

    const double bw = cfg.bandwidth_hz;
    const double T = cfg.symbol_duration_s();
    const double slope = bw / T;  // Hz per second
    const double f0 = -bw / 2.0 + static_cast<double>(symbol) * bw /
                                      static_cast<double>(cfg.chips_per_symbol());
    const double t_wrap = (bw / 2.0 - f0) / slope;  // time at which f hits +BW/2
    // Phase accumulated up to the wrap instant.
    const double phi_wrap = 2.0 * std::numbers::pi * (f0 * t_wrap + 0.5 * slope * t_wrap * t_wrap);

    const auto n_samples = static_cast<std::size_t>(std::llround(T * sample_rate_hz));
    ComplexSampleBuffer out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const double t = static_cast<double>(n) / sample_rate_hz;
        double phi;
        if (t < t_wrap) {
            phi = 2.0 * std::numbers::pi * (f0 * t + 0.5 * slope * t * t);
        } else {
            const double u = t - t_wrap;
            phi = phi_wrap + 2.0 * std::numbers::pi * (-bw / 2.0 * u + 0.5 * slope * u * u);
        }
        out.samples[n] = {std::cos(phi), std::sin(phi)};
    }
    return out;
}

// Guard silence between repeated packets. The paper's captures contain
// inter-packet dead time of unknown spacing; 10 ms is this workbench's stand-in.
inline constexpr double kGuardGapSeconds = 0.010;

// Preamble up-chirps followed by payload chirps, the whole packet repeated
// with guard gaps of zeros until duration_s is filled, truncated to exactly
// duration_s * sample_rate samples.
inline ComplexSampleBuffer synthesize_transmission(const LoRaConfig& cfg,
                                                   const SymbolStream& payload,
                                                   double sample_rate_hz,
                                                   double duration_s) {
    cfg.validate();
    if (!(duration_s > 0.0))
        throw std::invalid_argument("synthesize_transmission: duration must be positive");
    if (payload.symbols.empty() && cfg.preamble_symbols == 0)
        throw std::invalid_argument("synthesize_transmission: nothing to transmit");

    std::vector<cplx> packet;
    {
        const ComplexSampleBuffer base = synthesize_chirp(cfg, 0, sample_rate_hz);
        for (int p = 0; p < cfg.preamble_symbols; ++p)
            packet.insert(packet.end(), base.samples.begin(), base.samples.end());
        for (int sym : payload.symbols) {
            const ComplexSampleBuffer c = synthesize_chirp(cfg, sym, sample_rate_hz);
            packet.insert(packet.end(), c.samples.begin(), c.samples.end());
        }
    }
    const auto gap_len = static_cast<std::size_t>(std::llround(kGuardGapSeconds * sample_rate_hz));
    const auto total = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));

    ComplexSampleBuffer out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.reserve(total);
    while (out.samples.size() < total) {
        const std::size_t room = total - out.samples.size();
        const std::size_t take = std::min(room, packet.size());
        out.samples.insert(out.samples.end(), packet.begin(), packet.begin() + static_cast<std::ptrdiff_t>(take));
        if (out.samples.size() < total) {
            const std::size_t pad = std::min(total - out.samples.size(), gap_len);
            out.samples.insert(out.samples.end(), pad, cplx{0.0, 0.0});
        }
    }
    return out;
}

}  // namespace lorafp
