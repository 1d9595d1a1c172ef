#include "pesto/audio.hpp"
#include "pesto/common.hpp"
#include "pesto/rng.hpp"

#include <cmath>

namespace pesto {

std::vector<std::pair<AudioClip, PitchAnnotation>> synth_dataset(const SynthSpec& spec) {
    if (spec.n_samples <= 0 || spec.n_harmonics_max < 1)
        throw ValidationError("synth_dataset: invalid spec counts");
    if (!(spec.f0_min_hz > 0.0) || !(spec.f0_max_hz <= double(spec.sample_rate) / 2.0) ||
        spec.f0_min_hz > spec.f0_max_hz)
        throw ValidationError("synth_dataset: f0_range must lie in (0, sample_rate/2)");

    const std::size_t n_samp = std::size_t(spec.duration_s * double(spec.sample_rate));
    std::vector<std::pair<AudioClip, PitchAnnotation>> out;
    out.reserve(std::size_t(spec.n_samples));

    const double log_lo = std::log(spec.f0_min_hz);
    const double log_hi = std::log(spec.f0_max_hz);

    for (int i = 0; i < spec.n_samples; ++i) {
        Rng rng = Rng::keyed(spec.seed, {0x53594e54ULL, std::uint64_t(i)});
        const double f0 = std::exp(rng.uniform(log_lo, log_hi));
        const int n_harm = int(rng.uniform_int(1, spec.n_harmonics_max));
        const double decay = rng.uniform(spec.amp_decay_min, spec.amp_decay_max);

        AudioClip clip;
        clip.sample_rate = spec.sample_rate;
        clip.id = "synth-" + std::to_string(spec.seed) + "-" + std::to_string(i);
        clip.samples.assign(n_samp, 0.0f);

        const double w0 = 2.0 * M_PI * f0 / double(spec.sample_rate);
        double amp = 1.0;
        for (int h = 1; h <= n_harm; ++h) {
            const double wh = w0 * h;
            if (wh >= M_PI) break; // harmonic beyond Nyquist
            for (std::size_t n = 0; n < n_samp; ++n)
                clip.samples[n] += float(amp * std::sin(wh * double(n)));
            amp *= decay;
        }
        float peak = 0.0f;
        for (float s : clip.samples) peak = std::max(peak, std::abs(s));
        const float scale = peak > 0.0f ? 0.9f / peak : 0.0f;
        for (float& s : clip.samples) s *= scale;
        if (spec.noise_floor > 0.0)
            for (float& s : clip.samples) s += float(rng.gaussian(0.0, spec.noise_floor));

        PitchAnnotation ann;
        ann.id = clip.id;
        const double hop_s = 0.010;
        for (double t = 0.0; t < spec.duration_s - 1e-12; t += hop_s) {
            ann.times.push_back(t);
            ann.f0.push_back(f0);
        }
        out.emplace_back(std::move(clip), std::move(ann));
    }
    return out;
}

} // namespace pesto
