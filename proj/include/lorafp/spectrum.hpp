#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorafp/fft.hpp"
#include "lorafp/signal.hpp"

// Welch-averaged power spectral density estimation and the out-of-band power
// ratio built on it.

namespace lorafp {

inline constexpr std::size_t kWelchSegmentLen = 4096;

// Hann-windowed, 50%-overlap Welch periodogram. Returns per-bin power in
// natural order (DC at index 0); scaling is uniform so band ratios are exact.
inline std::vector<double> welch_psd(const ComplexSampleBuffer& buf,
                                     std::size_t segment_len = kWelchSegmentLen) {
    require_nonempty(buf, "welch_psd");
    if (buf.samples.size() < segment_len)
        throw std::invalid_argument("welch_psd: buffer shorter than one segment");

    std::vector<double> window(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(segment_len));

    const std::size_t hop = segment_len / 2;
    std::vector<double> psd(segment_len, 0.0);
    std::vector<cplx> seg(segment_len);
    std::size_t count = 0;
    for (std::size_t start = 0; start + segment_len <= buf.samples.size(); start += hop) {
        for (std::size_t i = 0; i < segment_len; ++i)
            seg[i] = buf.samples[start + i] * window[i];
        fft(seg);
        for (std::size_t i = 0; i < segment_len; ++i) psd[i] += std::norm(seg[i]);
        ++count;
    }
    const double scale = 1.0 / static_cast<double>(count);
    for (auto& p : psd) p *= scale;
    return psd;
}

// 10*log10(power outside +/- signal_bw/2 over power inside). Band edges are
// inclusive on the in-band side.
inline double measure_oob_power(const ComplexSampleBuffer& buf, double signal_bw_hz,
                                std::size_t segment_len = kWelchSegmentLen) {
    require_nonempty(buf, "measure_oob_power");
    if (buf.samples.size() < segment_len)
        throw std::invalid_argument("measure_oob_power: need at least one Welch segment");
    if (mean_power(buf) <= 0.0)
        throw std::invalid_argument("measure_oob_power: degenerate all-zero buffer");

    const std::vector<double> psd = welch_psd(buf, segment_len);
    const double fs = buf.sample_rate_hz;
    const std::size_t n = psd.size();
    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = static_cast<double>(i) * fs / static_cast<double>(n);
        if (f >= fs / 2.0) f -= fs;  // natural order -> signed frequency
        if (std::abs(f) <= signal_bw_hz / 2.0)
            inside += psd[i];
        else
            outside += psd[i];
    }
    if (inside <= 0.0)
        throw std::invalid_argument("measure_oob_power: no in-band power");
    return 10.0 * std::log10(outside / inside);
}

struct SpectrumPoint {
    double frequency_hz;
    double power_db;  // normalized, peak = 0 dB
};

// DC-centered normalized spectrum for plotting.
inline std::vector<SpectrumPoint> spectrum_table(const ComplexSampleBuffer& buf,
                                                 std::size_t segment_len = kWelchSegmentLen) {
    const std::vector<double> psd = welch_psd(buf, segment_len);
    const double fs = buf.sample_rate_hz;
    const std::size_t n = psd.size();
    const double peak = *std::max_element(psd.begin(), psd.end());
    if (peak <= 0.0) throw std::invalid_argument("spectrum_table: all-zero spectrum");

    std::vector<SpectrumPoint> table(n);
    const double floor_db = -200.0;
    for (std::size_t i = 0; i < n; ++i) {
        // fftshift: negative frequencies first.
        const std::size_t src = (i + n / 2) % n;
        double f = static_cast<double>(src) * fs / static_cast<double>(n);
        if (f >= fs / 2.0) f -= fs;
        const double ratio = psd[src] / peak;
        table[i] = {f, ratio > 0.0 ? 10.0 * std::log10(ratio) : floor_db};
    }
    return table;
}

// Two-column plain text: frequency_hz normalized_power_db.
inline void write_spectrum(const std::vector<SpectrumPoint>& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_spectrum: cannot open " + path);
    out << "# frequency_hz normalized_power_db\n";
    char line[64];
    for (const auto& p : table) {
        std::snprintf(line, sizeof(line), "%.3f %.6f\n", p.frequency_hz, p.power_db);
        out << line;
    }
}

}  // namespace lorafp
