#pragma once

#include "pesto/audio.hpp"
#include "pesto/pitch.hpp"

#include <string>
#include <vector>

namespace pesto {

/// Raw pitch / chroma accuracy over truth-voiced frames.
struct EvalReport {
    double rpa = 0.0;
    double rca = 0.0;
    std::size_t n_voiced = 0;
    struct ClipRow {
        std::string id;
        double rpa = 0.0, rca = 0.0;
        std::size_t n_voiced = 0;
    };
    std::vector<ClipRow> per_clip;
    std::string fingerprint;
};

/// Truth-to-frame alignment: nearest annotation within max_gap seconds;
/// frames with no truth inside the gap are excluded. Threshold is a strict
/// 0.5-semitone inequality.
inline constexpr double kPitchThresholdSemitones = 0.5;

double rpa(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s);
double rca(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s);

/// Frame-level counts for aggregation across clips.
struct PairCounts {
    std::size_t n_voiced = 0, n_pitch_ok = 0, n_chroma_ok = 0;
};
PairCounts count_hits(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s);

/// Runs inference on every clip and aggregates frame-weighted metrics.
EvalReport evaluate_clips(const Network<float>& model, const Calibration& calib,
                          const std::vector<std::pair<AudioClip, PitchAnnotation>>& data,
                          const CqtConfig& cqt_cfg, int k_max, double max_gap_s,
                          const InferOptions& opts = {});

/// Aligned stems for the SNR robustness sweep.
struct StemPair {
    AudioClip vocals;
    AudioClip background;
    PitchAnnotation truth;
};

/// Scales the background so the vocal-to-background power ratio (measured
/// over truth-voiced 10 ms frames) hits each target, mixes in the time
/// domain, and evaluates. An infinite SNR entry means "clean".
std::vector<std::pair<double, EvalReport>> snr_sweep(
    const Network<float>& model, const Calibration& calib, const std::vector<StemPair>& pairs,
    const std::vector<double>& snr_db_list, const CqtConfig& cqt_cfg, int k_max,
    double max_gap_s, const InferOptions& opts = {});

/// Mixture helper exposed for testing: returns vocals + scale * background
/// with the scale that realizes the target SNR over voiced frames.
AudioClip mix_at_snr(const AudioClip& vocals, const AudioClip& background,
                     const PitchAnnotation& truth, double snr_db);

void write_eval_report_json(const std::string& path, const EvalReport& report);
void write_eval_report_csv(const std::string& path, const EvalReport& report);

} // namespace pesto
