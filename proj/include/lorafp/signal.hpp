#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lorafp {

using cplx = std::complex<double>;

// Complex baseband samples plus the rate they were taken at. The carrier is
// carried along as an annotation only; all processing stays at baseband.
struct ComplexSampleBuffer {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;
    double carrier_hz = 0.0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

inline void require_nonempty(const ComplexSampleBuffer& buf, const char* who) {
    if (buf.empty()) throw std::invalid_argument(std::string(who) + ": empty buffer");
    if (buf.sample_rate_hz <= 0.0)
        throw std::invalid_argument(std::string(who) + ": sample rate must be positive");
}

// Mean |s|^2 over samples where the mask is set (all samples if mask empty).
inline double mean_power(const ComplexSampleBuffer& buf,
                         const std::vector<bool>& mask = {}) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        acc += std::norm(buf.samples[i]);
        ++n;
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

// Samples carrying signal, as opposed to inter-packet guard gaps of exact zeros.
inline std::vector<bool> active_mask(const ComplexSampleBuffer& buf, double threshold = 1e-12) {
    std::vector<bool> mask(buf.samples.size());
    for (std::size_t i = 0; i < buf.samples.size(); ++i)
        mask[i] = std::abs(buf.samples[i]) > threshold;
    return mask;
}

}  // namespace lorafp
