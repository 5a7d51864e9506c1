#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lorafp/rng.hpp"
#include "lorafp/signal.hpp"

// Transmitter- and receiver-side hardware impairments. Each device stamps its
// waveform with a unique combination of LO phase noise, carrier frequency
// offset, IQ path imbalance and DC offset; receivers add the same families of
// distortion plus a scalar gain.

namespace lorafp {

// The dimensionless phase-noise magnitude is calibrated against a 125 kHz
// signal: the per-sample Wiener increment std is magnitude * sqrt(ref_bw / fs),
// which keeps the parameter invariant under resampling.
inline constexpr double kPhaseNoiseRefBandwidthHz = 125000.0;

struct DeviceProfile {
    int device_id = 0;
    double phase_noise_magnitude = 0.0;
    double cfo_hz = 0.0;
    double iq_gain_imbalance_db = 0.0;
    double iq_phase_imbalance_rad = 0.0;
    cplx dc_offset{0.0, 0.0};
    std::uint64_t rng_seed = 0;

    // Same device, different noise realization; used to give every
    // transmission a fresh phase-noise path.
    DeviceProfile with_seed(std::uint64_t seed) const {
        DeviceProfile p = *this;
        p.rng_seed = seed;
        return p;
    }
};

struct ReceiverProfile {
    int receiver_id = 0;
    double phase_noise_magnitude = 0.0;
    double cfo_hz = 0.0;
    double gain_db = 0.0;
    double iq_gain_imbalance_db = 0.0;
    double iq_phase_imbalance_rad = 0.0;
    cplx dc_offset{0.0, 0.0};
    std::uint64_t rng_seed = 0;

    ReceiverProfile with_seed(std::uint64_t seed) const {
        ReceiverProfile p = *this;
        p.rng_seed = seed;
        return p;
    }
};

// Wiener (random-walk) LO phase. Single-use: state advances as samples are
// consumed.
class PhaseNoiseProcess {
public:
    PhaseNoiseProcess(double sigma_per_sample, std::uint64_t seed)
        : sigma_(sigma_per_sample), rng_(seed) {
        if (sigma_per_sample < 0.0)
            throw std::invalid_argument("PhaseNoiseProcess: sigma must be >= 0");
    }

    static PhaseNoiseProcess from_magnitude(double magnitude, double sample_rate_hz,
                                            std::uint64_t seed) {
        return PhaseNoiseProcess(magnitude * std::sqrt(kPhaseNoiseRefBandwidthHz / sample_rate_hz),
                                 seed);
    }

    double sigma_per_sample() const { return sigma_; }

    double next_phase() {
        if (sigma_ > 0.0) state_ += sigma_ * rng_.gaussian();
        return state_;
    }

private:
    double sigma_;
    double state_ = 0.0;
    Rng rng_;
};

// s[n] * exp(j*theta[n]); magnitude is preserved sample by sample.
inline ComplexSampleBuffer apply_phase_noise(const ComplexSampleBuffer& buf,
                                             PhaseNoiseProcess& process) {
    require_nonempty(buf, "apply_phase_noise");
    ComplexSampleBuffer out = buf;
    if (process.sigma_per_sample() == 0.0) return out;
    for (auto& s : out.samples) {
        const double th = process.next_phase();
        s *= cplx{std::cos(th), std::sin(th)};
    }
    return out;
}

// s[n] * exp(j*2*pi*cfo*n/fs). The angle is reduced modulo one cycle before
// the trig call so precision holds over long buffers.
inline ComplexSampleBuffer apply_cfo(const ComplexSampleBuffer& buf, double cfo_hz) {
    require_nonempty(buf, "apply_cfo");
    if (std::abs(cfo_hz) >= buf.sample_rate_hz / 2.0)
        throw std::invalid_argument("apply_cfo: offset at or beyond Nyquist");
    ComplexSampleBuffer out = buf;
    if (cfo_hz == 0.0) return out;
    const double cycles_per_sample = cfo_hz / buf.sample_rate_hz;
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        const double turns = std::fmod(cycles_per_sample * static_cast<double>(n), 1.0);
        const double phi = 2.0 * std::numbers::pi * turns;
        out.samples[n] *= cplx{std::cos(phi), std::sin(phi)};
    }
    return out;
}

// Image-injection model out = alpha*s + beta*conj(s) with
//   alpha = (g_i + g_q e^{j phi}) / 2,  beta = (g_i - g_q e^{j phi}) / 2,
// where g_i = 10^(+gain_db/40) scales the I path and g_q = 10^(-gain_db/40)
// the Q path, and phi rotates the Q path.
inline std::pair<cplx, cplx> iq_imbalance_coefficients(double gain_db, double phase_rad) {
    const double gi = std::pow(10.0, gain_db / 40.0);
    const double gq = std::pow(10.0, -gain_db / 40.0);
    const cplx rot{std::cos(phase_rad), std::sin(phase_rad)};
    return {(gi + gq * rot) / 2.0, (gi - gq * rot) / 2.0};
}

inline ComplexSampleBuffer apply_iq_imbalance(const ComplexSampleBuffer& buf, double gain_db,
                                              double phase_rad) {
    require_nonempty(buf, "apply_iq_imbalance");
    ComplexSampleBuffer out = buf;
    if (gain_db == 0.0 && phase_rad == 0.0) return out;
    const auto [alpha, beta] = iq_imbalance_coefficients(gain_db, phase_rad);
    for (auto& s : out.samples) s = alpha * s + beta * std::conj(s);
    return out;
}

inline ComplexSampleBuffer apply_dc_offset(const ComplexSampleBuffer& buf, cplx dc) {
    require_nonempty(buf, "apply_dc_offset");
    ComplexSampleBuffer out = buf;
    if (dc == cplx{0.0, 0.0}) return out;
    for (auto& s : out.samples) s += dc;
    return out;
}

// Transmitter chain, fixed order: IQ imbalance -> phase noise -> CFO -> DC.
// The order mirrors the physical chain (mixer imbalance at baseband, LO error
// at upconversion) and is part of the contract.
inline ComplexSampleBuffer apply_device(const ComplexSampleBuffer& buf,
                                        const DeviceProfile& profile) {
    ComplexSampleBuffer out =
        apply_iq_imbalance(buf, profile.iq_gain_imbalance_db, profile.iq_phase_imbalance_rad);
    PhaseNoiseProcess pn = PhaseNoiseProcess::from_magnitude(
        profile.phase_noise_magnitude, buf.sample_rate_hz, mix_seeds(profile.rng_seed, 0x504eULL));
    out = apply_phase_noise(out, pn);
    out = apply_cfo(out, profile.cfo_hz);
    return apply_dc_offset(out, profile.dc_offset);
}

// Receiver chain: same composition plus scalar gain ahead of the ADC DC offset.
inline ComplexSampleBuffer apply_receiver(const ComplexSampleBuffer& buf,
                                          const ReceiverProfile& profile) {
    ComplexSampleBuffer out =
        apply_iq_imbalance(buf, profile.iq_gain_imbalance_db, profile.iq_phase_imbalance_rad);
    PhaseNoiseProcess pn = PhaseNoiseProcess::from_magnitude(
        profile.phase_noise_magnitude, buf.sample_rate_hz, mix_seeds(profile.rng_seed, 0x52504eULL));
    out = apply_phase_noise(out, pn);
    out = apply_cfo(out, profile.cfo_hz);
    const double gain = std::pow(10.0, profile.gain_db / 20.0);
    if (gain != 1.0)
        for (auto& s : out.samples) s *= gain;
    return apply_dc_offset(out, profile.dc_offset);
}

// Ranges the population generator draws from. Phase-noise magnitudes are
// spaced evenly across [phase_noise_lo, phase_noise_hi] so a default
// population always spans the full scale; the remaining parameters are drawn
// uniformly inside +/- their spread.
struct PopulationSpread {
    double phase_noise_lo = 0.05;
    double phase_noise_hi = 0.45;
    double cfo_spread_hz = 150.0;
    double iq_gain_spread_db = 0.3;
    double iq_phase_spread_rad = 0.03;
    double dc_offset_mag = 0.003;

    static PopulationSpread zero_width() {
        PopulationSpread s;
        s.phase_noise_lo = s.phase_noise_hi = 0.2;
        s.cfo_spread_hz = 0.0;
        s.iq_gain_spread_db = 0.0;
        s.iq_phase_spread_rad = 0.0;
        s.dc_offset_mag = 0.0;
        return s;
    }
};

inline std::vector<DeviceProfile> generate_population(int count, std::uint64_t rng_seed,
                                                      const PopulationSpread& spread = {}) {
    if (count < 2)
        throw std::invalid_argument("generate_population: need at least 2 devices");
    std::vector<DeviceProfile> devices;
    devices.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seeds(rng_seed, static_cast<std::uint64_t>(i), 0xDEFULL));
        DeviceProfile d;
        d.device_id = i;
        d.phase_noise_magnitude =
            spread.phase_noise_lo + (spread.phase_noise_hi - spread.phase_noise_lo) *
                                        static_cast<double>(i) / std::max(1.0, static_cast<double>(count - 1));
        d.cfo_hz = rng.uniform(-spread.cfo_spread_hz, spread.cfo_spread_hz);
        d.iq_gain_imbalance_db = rng.uniform(-spread.iq_gain_spread_db, spread.iq_gain_spread_db);
        d.iq_phase_imbalance_rad =
            rng.uniform(-spread.iq_phase_spread_rad, spread.iq_phase_spread_rad);
        const double dc_mag = rng.uniform(0.0, spread.dc_offset_mag);
        const double dc_ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        d.dc_offset = spread.dc_offset_mag > 0.0
                          ? cplx{dc_mag * std::cos(dc_ang), dc_mag * std::sin(dc_ang)}
                          : cplx{0.0, 0.0};
        d.rng_seed = mix_seeds(rng_seed, static_cast<std::uint64_t>(i), 0x5eedULL);
        devices.push_back(d);
    }
    return devices;
}

// Deterministic receiver hardware. Receiver 1 is the mild reference unit;
// higher ids draw progressively different impairment mixes.
inline ReceiverProfile default_receiver_profile(int receiver_id, std::uint64_t rng_seed) {
    Rng rng(mix_seeds(rng_seed, static_cast<std::uint64_t>(receiver_id), 0x4343ULL));
    ReceiverProfile r;
    r.receiver_id = receiver_id;
    if (receiver_id <= 1) {
        r.phase_noise_magnitude = 0.06;
        r.cfo_hz = 40.0;
        r.gain_db = 0.0;
        r.iq_gain_imbalance_db = 0.05;
        r.iq_phase_imbalance_rad = 0.005;
        r.dc_offset = {0.001, -0.0005};
    } else {
        r.phase_noise_magnitude = 0.06 + 0.1 * (receiver_id - 1) + rng.uniform(0.0, 0.02);
        r.cfo_hz = rng.uniform(-400.0, 400.0);
        r.gain_db = rng.uniform(-2.0, 2.0);
        r.iq_gain_imbalance_db = rng.uniform(-0.4, 0.4);
        r.iq_phase_imbalance_rad = rng.uniform(-0.05, 0.05);
        r.dc_offset = {rng.uniform(-0.004, 0.004), rng.uniform(-0.004, 0.004)};
    }
    r.rng_seed = mix_seeds(rng_seed, static_cast<std::uint64_t>(receiver_id), 0x5eed2ULL);
    return r;
}

}  // namespace lorafp
