#include "pesto/fft.hpp"

#include "pesto/common.hpp"

#include <cmath>

namespace pesto {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw ValidationError("FftPlan: length must be a power of two, got " + std::to_string(n));
    rev_.resize(n);
    std::uint32_t log2n = 0;
    while ((std::size_t(1) << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t r = 0;
        for (std::uint32_t b = 0; b < log2n; ++b)
            if (i & (std::size_t(1) << b)) r |= std::uint32_t(1) << (log2n - 1 - b);
        rev_[i] = r;
    }
    // Twiddles for stage of half-size m: e^{-i pi k/m}, packed stage after stage.
    tw_.reserve(n);
    tw_inv_.reserve(n);
    for (std::size_t m = 1; m < n; m <<= 1) {
        for (std::size_t k = 0; k < m; ++k) {
            const double ang = -M_PI * double(k) / double(m);
            const auto w = std::complex<float>(float(std::cos(ang)), float(std::sin(ang)));
            tw_.push_back(w);
            tw_inv_.push_back(std::conj(w));
        }
    }
}

void FftPlan::transform(std::complex<float>* a, bool inv) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = rev_[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    // Explicit re/im butterflies; std::complex operator* would go through
    // the NaN-propagating libcall on every multiply.
    float* __restrict__ d = reinterpret_cast<float*>(a);
    const float* __restrict__ tw =
        reinterpret_cast<const float*>(inv ? tw_inv_.data() : tw_.data());
    std::size_t stage_off = 0;
    for (std::size_t m = 1; m < n; m <<= 1) {
        for (std::size_t base = 0; base < n; base += (m << 1)) {
            const std::size_t u0 = 2 * base;
            const std::size_t v0 = 2 * (base + m);
            for (std::size_t k = 0; k < m; ++k) {
                const float wr = tw[2 * (stage_off + k)];
                const float wi = tw[2 * (stage_off + k) + 1];
                const float vr = d[v0 + 2 * k], vi = d[v0 + 2 * k + 1];
                const float tr = wr * vr - wi * vi;
                const float ti = wr * vi + wi * vr;
                const float ur = d[u0 + 2 * k], ui = d[u0 + 2 * k + 1];
                d[u0 + 2 * k] = ur + tr;
                d[u0 + 2 * k + 1] = ui + ti;
                d[v0 + 2 * k] = ur - tr;
                d[v0 + 2 * k + 1] = ui - ti;
            }
        }
        stage_off += m;
    }
    if (inv) {
        const float s = 1.0f / float(n);
        for (std::size_t i = 0; i < 2 * n; ++i) d[i] *= s;
    }
}

void FftPlan::forward(std::complex<float>* data) const { transform(data, false); }
void FftPlan::inverse(std::complex<float>* data) const { transform(data, true); }

void FftPlan::forward(std::vector<std::complex<float>>& data) const {
    if (data.size() != n_) throw ValidationError("FftPlan::forward: size mismatch");
    transform(data.data(), false);
}

void FftPlan::inverse(std::vector<std::complex<float>>& data) const {
    if (data.size() != n_) throw ValidationError("FftPlan::inverse: size mismatch");
    transform(data.data(), true);
}

} // namespace pesto
