#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

// Iterative radix-2 Cooley-Tukey transform. Frame widths and Welch segment
// lengths in this project are powers of two, so nothing more general is
// needed, and keeping the kernel local makes the whole pipeline bit-stable.

namespace lorafp {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

template <typename T>
void fft_radix2(std::vector<std::complex<T>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<T> wlen(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<T> w(1, 0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<T> u = a[i + k];
                const std::complex<T> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const T inv_n = static_cast<T>(1) / static_cast<T>(n);
        for (auto& x : a) x *= inv_n;
    }
}

}  // namespace detail

// In-place forward DFT, natural bin order (DC at index 0), no scaling.
template <typename T>
void fft(std::vector<std::complex<T>>& a) {
    detail::fft_radix2(a, false);
}

// In-place inverse DFT with 1/N scaling.
template <typename T>
void ifft(std::vector<std::complex<T>>& a) {
    detail::fft_radix2(a, true);
}

template <typename T>
std::vector<std::complex<T>> fft_copy(const std::vector<std::complex<T>>& in) {
    auto out = in;
    fft(out);
    return out;
}

}  // namespace lorafp
