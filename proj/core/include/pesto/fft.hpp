#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace pesto {

/// Iterative radix-2 FFT over a power-of-two length. Plans precompute the
/// bit-reversal permutation and twiddle tables once and can be reused from
/// multiple threads (transform writes only into caller buffers).
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const { return n_; }

    /// In-place forward transform, e^{-2pi i kn/N} convention.
    void forward(std::complex<float>* data) const;
    /// In-place inverse transform including the 1/N factor.
    void inverse(std::complex<float>* data) const;

    void forward(std::vector<std::complex<float>>& data) const;
    void inverse(std::vector<std::complex<float>>& data) const;

private:
    void transform(std::complex<float>* data, bool inv) const;

    std::size_t n_;
    std::vector<std::uint32_t> rev_;
    std::vector<std::complex<float>> tw_;     // forward twiddles, all stages
    std::vector<std::complex<float>> tw_inv_; // conjugates
};

/// Next power of two >= n (n >= 1).
std::size_t next_pow2(std::size_t n);

} // namespace pesto
