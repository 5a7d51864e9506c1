#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lorafp/signal.hpp"

// Kaiser-windowed sinc low-pass design plus linear-phase filtering with the
// group delay compensated, so filtered buffers stay sample-aligned with their
// inputs.

namespace lorafp {

namespace detail {

// Zeroth-order modified Bessel function of the first kind (series expansion).
inline double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

}  // namespace detail

struct FirLowpassSpec {
    double cutoff_hz;           // passband edge
    double transition_hz;       // width of the transition band
    double stopband_atten_db;   // design attenuation
};

// Odd-length type-I linear-phase taps per Kaiser's design formulas. The sinc
// cutoff sits midway through the transition band.
inline std::vector<double> design_kaiser_lowpass(const FirLowpassSpec& spec,
                                                 double sample_rate_hz) {
    if (!(spec.cutoff_hz > 0.0) || !(spec.transition_hz > 0.0))
        throw std::invalid_argument("design_kaiser_lowpass: cutoff and transition must be positive");
    if (spec.cutoff_hz + spec.transition_hz >= sample_rate_hz / 2.0)
        throw std::invalid_argument("design_kaiser_lowpass: stopband edge at or beyond Nyquist");

    const double atten = spec.stopband_atten_db;
    double beta = 0.0;
    if (atten > 50.0)
        beta = 0.1102 * (atten - 8.7);
    else if (atten >= 21.0)
        beta = 0.5842 * std::pow(atten - 21.0, 0.4) + 0.07886 * (atten - 21.0);

    const double delta_omega = 2.0 * std::numbers::pi * spec.transition_hz / sample_rate_hz;
    std::size_t n_taps = static_cast<std::size_t>(std::ceil((atten - 7.95) / (2.285 * delta_omega))) + 1;
    if (n_taps % 2 == 0) ++n_taps;

    const double fc = (spec.cutoff_hz + spec.transition_hz / 2.0) / sample_rate_hz;  // cycles/sample
    const auto mid = static_cast<std::ptrdiff_t>(n_taps / 2);
    const double i0_beta = detail::bessel_i0(beta);

    std::vector<double> taps(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) {
        const auto m = static_cast<std::ptrdiff_t>(i) - mid;
        const double x = 2.0 * std::numbers::pi * fc * static_cast<double>(m);
        const double sinc = (m == 0) ? 2.0 * fc
                                     : std::sin(x) / (std::numbers::pi * static_cast<double>(m));
        const double r = static_cast<double>(m) / static_cast<double>(mid);
        const double window = detail::bessel_i0(beta * std::sqrt(1.0 - r * r)) / i0_beta;
        taps[i] = sinc * window;
    }
    return taps;
}

// Convolve with symmetric taps and drop the leading (n_taps-1)/2 samples so the
// output lines up with the input; length is preserved (zero padding at edges).
inline ComplexSampleBuffer filter_compensated(const ComplexSampleBuffer& buf,
                                              const std::vector<double>& taps) {
    require_nonempty(buf, "filter_compensated");
    const std::size_t n = buf.samples.size();
    const std::size_t nt = taps.size();
    const std::size_t delay = nt / 2;

    ComplexSampleBuffer out;
    out.sample_rate_hz = buf.sample_rate_hz;
    out.carrier_hz = buf.carrier_hz;
    out.samples.assign(n, cplx{0.0, 0.0});

    auto edge_sample = [&](std::size_t i) {
        cplx acc{0.0, 0.0};
        const std::size_t center = i + delay;
        const std::size_t k_lo = center >= (nt - 1) ? 0 : (nt - 1) - center;
        const std::size_t k_hi = std::min(nt, center + 1);
        for (std::size_t k = k_lo; k < k_hi; ++k) {
            const std::size_t src = center - k;
            if (src < n) acc += taps[k] * buf.samples[src];
        }
        return acc;
    };

    // Fully-overlapped body runs without bounds checks; edges fall back to the
    // checked path.
    const std::size_t body_lo = nt > delay + 1 ? nt - 1 - delay : 0;
    const std::size_t body_hi = n > delay + nt ? n - delay : (n > body_lo ? body_lo : 0);
    for (std::size_t i = 0; i < std::min(body_lo, n); ++i) out.samples[i] = edge_sample(i);
    const cplx* in = buf.samples.data();
    const double* tp = taps.data();
    for (std::size_t i = body_lo; i < body_hi; ++i) {
        const cplx* base = in + (i + delay);
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < nt; ++k) {
            const cplx s = *(base - static_cast<std::ptrdiff_t>(k));
            re += tp[k] * s.real();
            im += tp[k] * s.imag();
        }
        out.samples[i] = {re, im};
    }
    for (std::size_t i = std::max(body_lo, body_hi); i < n; ++i) out.samples[i] = edge_sample(i);
    return out;
}

}  // namespace lorafp
