#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pesto {

/// Mono audio buffer, samples in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;
    std::string id;

    double duration() const { return double(samples.size()) / double(sample_rate); }
};

/// Time-stamped f0 ground truth; f0 == 0 encodes an unvoiced frame.
struct PitchAnnotation {
    std::vector<double> times; // seconds, strictly increasing
    std::vector<double> f0;    // Hz, >= 0
    std::string id;

    void validate() const;
};

enum class AnnotationFormat { time_freq_csv, mir1k_pv };

/// Synthetic harmonic dataset description. Clips are sums of harmonics of a
/// log-uniformly drawn f0 with geometrically decaying amplitudes,
/// peak-normalized to 0.9, plus white noise at noise_floor.
struct SynthSpec {
    int n_samples = 500;                       // number of clips
    double f0_min_hz = 55.0, f0_max_hz = 1760.0;
    int n_harmonics_max = 8;
    double amp_decay_min = 0.3, amp_decay_max = 0.8;
    double duration_s = 0.5;
    double noise_floor = 1e-4;                 // linear amplitude
    std::uint64_t seed = 0;
    int sample_rate = 16000;
};

/// Reads PCM (16/24/32-bit) and IEEE float32 WAV; multichannel input is
/// averaged down to mono. Throws FormatError / UnsupportedError.
AudioClip load_wav(const std::string& path);

/// Writes mono 16-bit PCM (float32 when `as_float`).
void save_wav(const std::string& path, const AudioClip& clip, bool as_float = false);

/// Band-limited resampling (Hann-windowed sinc, 32-tap half-width at the
/// lower rate, per-sample kernel normalization so DC is preserved exactly).
/// Output length is round(n * target/source), i.e. duration is preserved
/// within one sample period.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Parses "time_seconds,frequency_hz" CSV or MIR-1K style .pv (one semitone
/// value per frame, 0 = unvoiced). For pv input, frame n is stamped at
/// t = (n + 1) * hop with the dataset's 20 ms hop by default.
PitchAnnotation load_annotations(const std::string& path, AnnotationFormat format,
                                 double pv_hop_s = 0.020);

/// Writes the CSV form ("%.6f,%.3f" rows). load->save->load is an identity
/// at that precision.
void save_annotations(const std::string& path, const PitchAnnotation& ann);

/// Truth lookup at an arbitrary time. Nearest-neighbor returns 0 (unvoiced)
/// when no annotation lies within max_gap seconds.
double annotation_at_nearest(const PitchAnnotation& ann, double t, double max_gap);
/// Linear interpolation between neighboring voiced annotations; returns 0
/// outside the annotated span or when either neighbor is unvoiced.
double annotation_at_linear(const PitchAnnotation& ann, double t);

/// Deterministic generation: identical spec (including seed) gives
/// bit-identical clips. The annotation of each clip is its constant f0
/// sampled on a 10 ms grid.
std::vector<std::pair<AudioClip, PitchAnnotation>> synth_dataset(const SynthSpec& spec);

} // namespace pesto
