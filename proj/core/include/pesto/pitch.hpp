#pragma once

#include "pesto/audio.hpp"
#include "pesto/cqt.hpp"
#include "pesto/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace pesto {

/// MIDI convention: 440 Hz == semitone 69.
inline double semitone_to_hz(double p) { return 440.0 * std::pow(2.0, (p - 69.0) / 12.0); }
inline double hz_to_semitone(double f) { return 69.0 + 12.0 * std::log2(f / 440.0); }

/// Class-index-to-pitch offset fitted on synthetic data with known f0.
struct Calibration {
    int p0 = 0;
    int bins_per_semitone = 3;
    double residual_median_bins = 0.0; // median of (r - p0)
    double residual_iqr_bins = 0.0;    // IQR of r, in bins
    int n_frames = 0;
};

/// Inference product: one row per CQT frame.
struct PitchTrack {
    std::vector<double> times;           // seconds
    std::vector<double> pitch_hz;        // 0 when below the confidence floor
    std::vector<double> pitch_semitones; // MIDI scale; meaningful where voiced
    std::vector<double> confidence;      // max probability
};

struct InferOptions {
    double confidence_floor = 0.0; // 0 = report every frame as voiced
    bool parabolic = false;        // sub-bin refinement over log-probs
};

/// Fits p0 = round(median(b * p_true - argmax)) over all voiced frames of
/// the calibration set and reports residual statistics around it.
Calibration calibrate(const Network<float>& model,
                      const std::vector<std::pair<AudioClip, PitchAnnotation>>& synth,
                      const CqtConfig& cqt_cfg, int k_max);

/// Full file pipeline: CQT -> central crop -> eval-mode forward ->
/// (argmax + p0) / b. Deterministic.
PitchTrack infer_file(const Network<float>& model, const Calibration& calib,
                      const AudioClip& clip, const CqtConfig& cqt_cfg, int k_max,
                      const InferOptions& opts = {});

/// Same pipeline on a precomputed dB CQT (analyzer reuse across clips).
PitchTrack infer_sequence(const Network<float>& model, const Calibration& calib,
                          const CqtSequence& seq, int k_max, const InferOptions& opts = {});

/// "time,frequency,confidence" rows, "%.4f,%.3f,%.4f".
void write_pitch_csv(const std::string& path, const PitchTrack& track);

} // namespace pesto
