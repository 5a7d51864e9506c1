#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorafp/rng.hpp"
#include "lorafp/signal.hpp"

// Wireless channel variability along the scenario axes: Rayleigh taps with an
// exponential power profile, block-static per capture, plus AWGN at a
// requested SNR.

namespace lorafp {

enum class Location { room, office, outdoor };

inline const char* to_string(Location loc) {
    switch (loc) {
        case Location::room: return "room";
        case Location::office: return "office";
        default: return "outdoor";
    }
}

inline Location location_from_string(const std::string& s) {
    if (s == "room") return Location::room;
    if (s == "office") return Location::office;
    if (s == "outdoor") return Location::outdoor;
    throw std::invalid_argument("unknown location: " + s);
}

struct ScenarioSpec {
    std::string scenario_id;
    int day = 1;
    Location location = Location::room;
    int config_id = 1;      // 1..4, maps to SF 7/8/11/12
    int receiver_id = 1;
    double snr_db = 25.0;
    double delay_spread_s = 100e-9;
    int num_taps = 3;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (num_taps < 1) throw std::invalid_argument("ScenarioSpec: num_taps must be >= 1");
        if (delay_spread_s < 0.0)
            throw std::invalid_argument("ScenarioSpec: delay spread must be >= 0");
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw std::invalid_argument("ScenarioSpec: snr_db must be finite or +inf");
        if (config_id < 1 || config_id > 4)
            throw std::invalid_argument("ScenarioSpec: config_id must be in 1..4");
    }
};

// Workbench conventions for the three environments; not measurements. All
// values can be overridden in the plan file.
inline void apply_location_preset(ScenarioSpec& spec) {
    switch (spec.location) {
        case Location::room:
            spec.num_taps = 3;
            spec.delay_spread_s = 100e-9;
            spec.snr_db = 25.0;
            break;
        case Location::office:
            spec.num_taps = 5;
            spec.delay_spread_s = 300e-9;
            spec.snr_db = 20.0;
            break;
        case Location::outdoor:
            spec.num_taps = 2;
            spec.delay_spread_s = 50e-9;
            spec.snr_db = 15.0;
            break;
    }
}

struct ChannelRealization {
    std::vector<cplx> taps;  // tap d sits at integer sample delay d
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t noise_seed = 0;

    ChannelRealization with_noise_seed(std::uint64_t seed) const {
        ChannelRealization c = *this;
        c.noise_seed = seed;
        return c;
    }
};

// Rayleigh taps at integer sample delays with power decaying as
// exp(-d*Ts/delay_spread), normalized so the realized tap power sums to
// exactly 1 before SNR scaling. Deterministic in (spec.rng_seed, link_seed).
inline ChannelRealization realize_channel(const ScenarioSpec& spec, std::uint64_t link_seed,
                                          double sample_rate_hz = 1e6) {
    spec.validate();
    Rng rng(mix_seeds(spec.rng_seed, link_seed, 0xC4A2ULL));
    const double ts = 1.0 / sample_rate_hz;

    ChannelRealization ch;
    ch.snr_db = spec.snr_db;
    ch.taps.resize(static_cast<std::size_t>(spec.num_taps));
    double power_sum = 0.0;
    for (int d = 0; d < spec.num_taps; ++d) {
        double profile = 0.0;
        if (d == 0)
            profile = 1.0;
        else if (spec.delay_spread_s > 0.0)
            profile = std::exp(-static_cast<double>(d) * ts / spec.delay_spread_s);
        const cplx g = std::sqrt(profile) * rng.complex_gaussian();
        ch.taps[static_cast<std::size_t>(d)] = g;
        power_sum += std::norm(g);
    }
    if (power_sum < 1e-30) {
        ch.taps.assign(ch.taps.size(), cplx{0.0, 0.0});
        ch.taps[0] = 1.0;
    } else {
        const double scale = 1.0 / std::sqrt(power_sum);
        for (auto& t : ch.taps) t *= scale;
    }
    ch.noise_seed = rng.u64();
    return ch;
}

// Small session drift: rotates tap phases and jitters magnitudes, then
// renormalizes. Models the quasi-static indoor link wandering slightly
// between captures taken minutes apart within one session.
inline ChannelRealization perturb_channel(const ChannelRealization& base, double phase_jitter_rad,
                                          double amp_jitter, std::uint64_t seed) {
    Rng rng(mix_seeds(seed, 0xD21F7ULL));
    ChannelRealization ch = base;
    if (phase_jitter_rad == 0.0 && amp_jitter == 0.0) return ch;
    double power_sum = 0.0;
    for (auto& t : ch.taps) {
        const double dphi = phase_jitter_rad * rng.gaussian();
        const double scale = std::max(0.0, 1.0 + amp_jitter * rng.gaussian());
        t *= scale * cplx{std::cos(dphi), std::sin(dphi)};
        power_sum += std::norm(t);
    }
    if (power_sum > 1e-30) {
        const double norm = 1.0 / std::sqrt(power_sum);
        for (auto& t : ch.taps) t *= norm;
    }
    return ch;
}

// Linear convolution with the taps (output trimmed to the input length), then
// complex AWGN at the realization's SNR. Signal power is measured over the
// input's non-gap samples; snr_db = +inf means noiseless.
inline ComplexSampleBuffer apply_channel(const ComplexSampleBuffer& buf,
                                         const ChannelRealization& ch) {
    require_nonempty(buf, "apply_channel");
    if (buf.samples.size() <= ch.taps.size() - 1)
        throw std::invalid_argument("apply_channel: buffer shorter than channel memory");

    ComplexSampleBuffer out;
    out.sample_rate_hz = buf.sample_rate_hz;
    out.carrier_hz = buf.carrier_hz;
    out.samples.assign(buf.samples.size(), cplx{0.0, 0.0});
    const std::size_t n = buf.samples.size();
    for (std::size_t d = 0; d < ch.taps.size(); ++d) {
        const cplx g = ch.taps[d];
        if (g == cplx{0.0, 0.0}) continue;
        for (std::size_t i = d; i < n; ++i) out.samples[i] += g * buf.samples[i - d];
    }

    if (std::isinf(ch.snr_db)) return out;

    const std::vector<bool> mask = active_mask(buf);
    const double signal_power = mean_power(out, mask);
    if (signal_power <= 0.0)
        throw std::invalid_argument("apply_channel: buffer carries no signal to scale noise to");
    const double noise_power = signal_power * std::pow(10.0, -ch.snr_db / 10.0);
    const double amp = std::sqrt(noise_power);
    Rng rng(mix_seeds(ch.noise_seed, 0xA36EULL));
    for (auto& s : out.samples) s += amp * rng.complex_gaussian();
    return out;
}

}  // namespace lorafp
