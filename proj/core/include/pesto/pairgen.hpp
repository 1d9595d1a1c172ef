#pragma once

#include "pesto/common.hpp"
#include "pesto/rng.hpp"

#include <complex>
#include <vector>

namespace pesto {

/// Crop-based pitch-shift simulation: a length-K frame yields length-F
/// views shifted by up to k_max bins without boundary artifacts.
struct CropConfig {
    int k_max = 16;
    int input_bins = 297;

    int out_bins() const { return input_bins - 2 * k_max; }
    void validate() const {
        if (k_max <= 0) throw ValidationError("crop: k_max must be positive");
        if (out_bins() < 1) throw ValidationError("crop: out_bins must be >= 1");
    }
    bool operator==(const CropConfig&) const = default;
};

enum class BetaMode { none, constant, uniform01, gauss };

/// Pitch-preserving augmentations applied to dB-scaled CQT frames.
/// Gain adds a constant (dB is additive); white noise is Gaussian per bin.
/// When beta_mode != none, complex-domain background mixing replaces
/// gain/noise entirely.
struct AugmentConfig {
    double p_apply = 0.7;
    double noise_std_min = 0.1, noise_std_max = 2.0;
    double gain_db_min = -6.0, gain_db_max = 3.0;
    BetaMode beta_mode = BetaMode::none;
    double beta_param = 1.0; // constant value, or sigma for gauss

    void validate() const {
        if (p_apply < 0.0 || p_apply > 1.0)
            throw ValidationError("augment: p_apply must be in [0,1]");
        if (noise_std_min > noise_std_max || gain_db_min > gain_db_max)
            throw ValidationError("augment: empty range");
    }
    bool operator==(const AugmentConfig&) const = default;
};

/// Training triplets: clean view, augmented view, augmented shifted view,
/// and the shift k per item. Row-major (batch, out_bins).
struct TrainBatch {
    int batch = 0;
    int out_bins = 0;
    std::vector<float> x, x_aug, x_shift_aug;
    std::vector<int> k;

    const float* row_x(int i) const { return x.data() + std::size_t(i) * out_bins; }
    const float* row_aug(int i) const { return x_aug.data() + std::size_t(i) * out_bins; }
    const float* row_shift(int i) const { return x_shift_aug.data() + std::size_t(i) * out_bins; }
};

/// x[j] = frame[k_max + j]; x_k[j] = frame[k_max - k + j]. On overlapping
/// indices x_k is the exact k-transposition of x.
void crop_pair(const float* frame, int k, const CropConfig& cfg, float* x, float* x_k);

/// Uniform integer in {-k_max, ..., k_max}.
int sample_k(Rng& rng, const CropConfig& cfg);

/// In-place; gain and noise fire independently with probability p_apply
/// (gain first).
void augment(float* x, int n, const AugmentConfig& cfg, Rng& rng);

/// frames: (n_rows, input_bins) row-major dB frames. One triplet per row.
TrainBatch make_batch(const float* frames, int n_rows, const AugmentConfig& aug,
                      const CropConfig& crop, Rng& rng);

/// Background-mixing variant: the augmented views are dB conversions of
/// vocals + beta * background (complex, per-item independent beta draws),
/// mixed before dB conversion and cropping. The clean view uses beta = 0.
TrainBatch make_batch_mixed(const std::complex<float>* vocals, const std::complex<float>* background,
                            int n_rows, const AugmentConfig& aug, const CropConfig& crop, Rng& rng);

double draw_beta(const AugmentConfig& cfg, Rng& rng);

} // namespace pesto
