#include "pesto/pairgen.hpp"

#include "pesto/cqt.hpp"

#include <cmath>
#include <cstring>

namespace pesto {

void crop_pair(const float* frame, int k, const CropConfig& cfg, float* x, float* x_k) {
    cfg.validate();
    if (k < -cfg.k_max || k > cfg.k_max)
        throw ValidationError("crop_pair: |k| exceeds k_max");
    const int f = cfg.out_bins();
    std::memcpy(x, frame + cfg.k_max, std::size_t(f) * sizeof(float));
    std::memcpy(x_k, frame + cfg.k_max - k, std::size_t(f) * sizeof(float));
}

int sample_k(Rng& rng, const CropConfig& cfg) {
    return int(rng.uniform_int(-cfg.k_max, cfg.k_max));
}

void augment(float* x, int n, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    // Draws happen unconditionally so the random stream does not depend on
    // which branches fire.
    const bool do_gain = rng.uniform01() < cfg.p_apply;
    const double gain = rng.uniform(cfg.gain_db_min, cfg.gain_db_max);
    const bool do_noise = rng.uniform01() < cfg.p_apply;
    const double sigma = rng.uniform(cfg.noise_std_min, cfg.noise_std_max);
    if (do_gain) {
        const float g = float(gain);
        for (int i = 0; i < n; ++i) x[i] += g;
    }
    if (do_noise) {
        for (int i = 0; i < n; ++i) x[i] += float(rng.gaussian(0.0, sigma));
    }
}

double draw_beta(const AugmentConfig& cfg, Rng& rng) {
    switch (cfg.beta_mode) {
        case BetaMode::none: return 0.0;
        case BetaMode::constant: return cfg.beta_param;
        case BetaMode::uniform01: return rng.uniform01();
        case BetaMode::gauss: return std::abs(rng.gaussian(0.0, cfg.beta_param));
    }
    return 0.0;
}

TrainBatch make_batch(const float* frames, int n_rows, const AugmentConfig& aug,
                      const CropConfig& crop, Rng& rng) {
    crop.validate();
    aug.validate();
    const int f = crop.out_bins();
    TrainBatch tb;
    tb.batch = n_rows;
    tb.out_bins = f;
    tb.x.resize(std::size_t(n_rows) * f);
    tb.x_aug.resize(std::size_t(n_rows) * f);
    tb.x_shift_aug.resize(std::size_t(n_rows) * f);
    tb.k.resize(std::size_t(n_rows));

    for (int i = 0; i < n_rows; ++i) {
        const float* frame = frames + std::size_t(i) * crop.input_bins;
        const int k = sample_k(rng, crop);
        tb.k[std::size_t(i)] = k;
        float* x = tb.x.data() + std::size_t(i) * f;
        float* xs = tb.x_shift_aug.data() + std::size_t(i) * f;
        crop_pair(frame, k, crop, x, xs);
        float* xa = tb.x_aug.data() + std::size_t(i) * f;
        std::memcpy(xa, x, std::size_t(f) * sizeof(float));
        augment(xa, f, aug, rng);
        augment(xs, f, aug, rng);
    }
    return tb;
}

TrainBatch make_batch_mixed(const std::complex<float>* vocals,
                            const std::complex<float>* background, int n_rows,
                            const AugmentConfig& aug, const CropConfig& crop, Rng& rng) {
    crop.validate();
    aug.validate();
    if (aug.beta_mode == BetaMode::none)
        throw ValidationError("make_batch_mixed: beta_mode is none");
    const int big = crop.input_bins;
    const int f = crop.out_bins();
    TrainBatch tb;
    tb.batch = n_rows;
    tb.out_bins = f;
    tb.x.resize(std::size_t(n_rows) * f);
    tb.x_aug.resize(std::size_t(n_rows) * f);
    tb.x_shift_aug.resize(std::size_t(n_rows) * f);
    tb.k.resize(std::size_t(n_rows));

    std::vector<float> clean_db(std::size_t(big), 0.0f);
    std::vector<float> mixed_db(std::size_t(big), 0.0f);
    for (int i = 0; i < n_rows; ++i) {
        const std::complex<float>* v = vocals + std::size_t(i) * big;
        const std::complex<float>* bg = background + std::size_t(i) * big;
        const int k = sample_k(rng, crop);
        tb.k[std::size_t(i)] = k;

        for (int j = 0; j < big; ++j)
            clean_db[std::size_t(j)] = 20.0f * std::log10(std::abs(v[j]) + float(kCqtEpsMag));
        float* x = tb.x.data() + std::size_t(i) * f;
        std::memcpy(x, clean_db.data() + crop.k_max, std::size_t(f) * sizeof(float));

        const double b1 = draw_beta(aug, rng);
        for (int j = 0; j < big; ++j)
            mixed_db[std::size_t(j)] =
                20.0f * std::log10(std::abs(v[j] + float(b1) * bg[j]) + float(kCqtEpsMag));
        std::memcpy(tb.x_aug.data() + std::size_t(i) * f, mixed_db.data() + crop.k_max,
                    std::size_t(f) * sizeof(float));

        const double b2 = draw_beta(aug, rng);
        for (int j = 0; j < big; ++j)
            mixed_db[std::size_t(j)] =
                20.0f * std::log10(std::abs(v[j] + float(b2) * bg[j]) + float(kCqtEpsMag));
        std::memcpy(tb.x_shift_aug.data() + std::size_t(i) * f,
                    mixed_db.data() + crop.k_max - k, std::size_t(f) * sizeof(float));
    }
    return tb;
}

} // namespace pesto
