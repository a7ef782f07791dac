#pragma once

// Iterative radix-2 complex FFT for power-of-two sizes.
//
// Conventions: forward(v)[k] = (1/N) sum_j v[j] exp(-i 2 pi k j / N),
// backward(v)[j] = sum_k v[k] exp(+i 2 pi k j / N), so backward(forward(v)) = v
// and forward coefficients are the Fourier coefficients of the trigonometric
// interpolant. Twiddle tables are cached per size; execution order is fixed,
// so results are bit-deterministic.

#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <vector>

namespace smcf {

using cplx = std::complex<double>;

namespace detail {

struct FftPlan {
    std::size_t n = 0;
    std::vector<std::size_t> rev;       // bit-reversal permutation
    std::vector<cplx> w_fwd;            // stage twiddles, forward sign
    std::vector<cplx> w_bwd;

    explicit FftPlan(std::size_t size) : n(size) {
        assert(n > 0 && (n & (n - 1)) == 0);
        rev.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev[i] = r;
        }
        w_fwd.resize(n / 2);
        w_bwd.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * std::numbers::pi * double(k) / double(n);
            w_fwd[k] = {std::cos(ang), std::sin(ang)};
            w_bwd[k] = std::conj(w_fwd[k]);
        }
    }

    void transform(cplx* v, bool forward) const {
        const auto& w = forward ? w_fwd : w_bwd;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = rev[i];
            if (i < r) std::swap(v[i], v[r]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t stride = n / len;
            for (std::size_t base = 0; base < n; base += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const cplx t = w[k * stride] * v[base + k + len / 2];
                    const cplx u = v[base + k];
                    v[base + k] = u + t;
                    v[base + k + len / 2] = u - t;
                }
            }
        }
        if (forward) {
            const double inv = 1.0 / double(n);
            for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
        }
    }
};

inline const FftPlan& fft_plan(std::size_t n) {
    static std::map<std::size_t, FftPlan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
    return it->second;
}

}  // namespace detail

inline void fft_forward(cplx* v, std::size_t n) { detail::fft_plan(n).transform(v, true); }
inline void fft_backward(cplx* v, std::size_t n) { detail::fft_plan(n).transform(v, false); }

// Signed mode index for slot k of an N-point transform: 0,1,...,N/2-1,-N/2,...,-1.
inline int fft_mode(std::size_t k, std::size_t n) {
    return k < n / 2 ? int(k) : int(k) - int(n);
}

}  // namespace smcf
