#pragma once

#include "pesto/audio.hpp"
#include "pesto/fft.hpp"

#include <complex>
#include <string>
#include <vector>

namespace pesto {

enum class CqtScale { db, cplx };

/// Log-frequency frontend settings. Bin i is centered at
/// f_min * 2^(i / (12 b)); with the defaults that is 297 third-of-semitone
/// bins from A0 upward at 16 kHz, 10 ms hop.
struct CqtConfig {
    double f_min = 27.5;
    int bins_per_semitone = 3;
    int n_bins = 297;
    int hop = 160;
    int sample_rate = 16000;
    CqtScale scale = CqtScale::db;

    double bin_frequency(int i) const;
    /// Q = 1 / (2^(1/(12 b)) - 1); kernel length at bin i is Q * sr / f_i.
    double q_factor() const;
    void validate() const;
    bool operator==(const CqtConfig&) const = default;
};

/// Magnitudes are stored in dB, floored at 20*log10(kCqtEpsMag) for silence.
inline constexpr double kCqtEpsMag = 1e-7;

/// Time-major frame matrix; exactly one of `db` / `cx` is populated
/// depending on config.scale.
struct CqtSequence {
    CqtConfig config;
    int n_frames = 0;
    std::vector<float> db;                 // n_frames * n_bins
    std::vector<std::complex<float>> cx;   // n_frames * n_bins

    double frame_time(int t) const { return double(t) * config.hop / config.sample_rate; }
    const float* frame(int t) const { return db.data() + std::size_t(t) * config.n_bins; }
    float* frame(int t) { return db.data() + std::size_t(t) * config.n_bins; }
    const std::complex<float>* cframe(int t) const {
        return cx.data() + std::size_t(t) * config.n_bins;
    }
};

/// Precomputed sparse spectral kernels for one config. Construction is the
/// expensive part; forward() is safe to call concurrently.
class CqtAnalyzer {
public:
    explicit CqtAnalyzer(const CqtConfig& config);

    const CqtConfig& config() const { return cfg_; }

    CqtSequence forward(const AudioClip& clip) const;

    /// Single frame centered at sample `center`; out must hold n_bins values.
    void frame_complex(const float* samples, std::size_t n, long center,
                       std::complex<float>* out) const;

private:
    CqtConfig cfg_;
    std::size_t fft_size_;
    FftPlan plan_;      // complex plan of fft_size/2 for the packed real FFT
    struct SparseKernel {
        std::uint32_t start;                    // first spectrum index
        std::vector<std::complex<float>> conj;  // conj(K) over the support
    };
    std::vector<SparseKernel> kernels_;
    std::vector<std::complex<float>> unpack_a_, unpack_b_; // real-FFT unpack twiddles
};

/// One-shot convenience wrapper around CqtAnalyzer.
CqtSequence cqt_forward(const AudioClip& clip, const CqtConfig& config);

/// Complex-domain mix: vocals + beta * background, elementwise.
CqtSequence mix_complex(const CqtSequence& vocals, const CqtSequence& background, double beta);

/// Converts a complex sequence to dB magnitudes with the standard floor.
CqtSequence complex_to_db(const CqtSequence& seq);

/// Cache file: "PCQT" magic, version, canonical-JSON config header,
/// then little-endian f32 payload (row-major dB, or interleaved re/im).
void write_cqt_cache(const std::string& path, const CqtSequence& seq);
CqtSequence read_cqt_cache(const std::string& path);

} // namespace pesto
