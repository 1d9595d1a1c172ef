#include "pesto/audio.hpp"
#include "pesto/common.hpp"

#include <cmath>

namespace pesto {

namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

} // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw ValidationError("resample: target_rate must be positive");
    if (clip.sample_rate <= 0 || clip.samples.empty())
        throw ValidationError("resample: invalid input clip");
    if (target_rate == clip.sample_rate) return clip;

    const double ratio = double(target_rate) / double(clip.sample_rate);
    // Cutoff at the lower Nyquist; kernel half-width of 32 zero crossings
    // at the cutoff rate.
    const double cutoff = std::min(1.0, ratio);
    const double half_width = 32.0 / cutoff;

    const std::size_t n_in = clip.samples.size();
    const std::size_t n_out = std::size_t(std::llround(double(n_in) * ratio));

    AudioClip out;
    out.sample_rate = target_rate;
    out.id = clip.id;
    out.samples.resize(n_out);

    for (std::size_t n = 0; n < n_out; ++n) {
        const double t = double(n) / ratio; // position in input samples
        const long k_lo = long(std::ceil(t - half_width));
        const long k_hi = long(std::floor(t + half_width));
        double acc = 0.0, norm = 0.0;
        for (long k = k_lo; k <= k_hi; ++k) {
            const double u = (double(k) - t) / half_width;   // [-1, 1]
            const double w = 0.5 + 0.5 * std::cos(M_PI * u); // Hann taper
            const double h = cutoff * sinc(cutoff * (double(k) - t)) * w;
            norm += h;
            if (k >= 0 && k < long(n_in)) acc += h * double(clip.samples[std::size_t(k)]);
        }
        // Normalizing by the full kernel sum keeps DC gain exactly 1 and is
        // independent of clip boundaries.
        out.samples[n] = float(norm != 0.0 ? acc / norm : 0.0);
    }
    return out;
}

} // namespace pesto
