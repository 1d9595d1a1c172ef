#include "pesto/pitch.hpp"

#include "pesto/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pesto {

namespace {

double quantile(std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// dB frame -> central crop -> eval forward; returns (argmax, max prob,
/// refined argmax offset when parabolic).
struct FrameResult {
    int argmax = 0;
    double conf = 0.0;
    double offset = 0.0;
};

FrameResult run_frame(const Network<float>& model, const float* frame, int k_max,
                      Tensor<float>& in, Workspace<float>& ws, bool parabolic) {
    const int f_bins = model.config().in_bins;
    in.resize(1, 1, f_bins);
    std::copy(frame + k_max, frame + k_max + f_bins, in.v.begin());
    const Tensor<float>& probs = model.forward(in, false, 0, ws);
    const float* p = probs.row(0, 0);
    int am = 0;
    for (int i = 1; i < probs.f; ++i)
        if (p[i] > p[am]) am = i;
    FrameResult r;
    r.argmax = am;
    r.conf = p[am];
    if (parabolic && am > 0 && am + 1 < probs.f) {
        const double lm = std::log(std::max(double(p[am - 1]), 1e-30));
        const double l0 = std::log(std::max(double(p[am]), 1e-30));
        const double lp = std::log(std::max(double(p[am + 1]), 1e-30));
        const double denom = lm - 2.0 * l0 + lp;
        if (denom < 0.0) r.offset = 0.5 * (lm - lp) / denom;
    }
    return r;
}

} // namespace

Calibration calibrate(const Network<float>& model,
                      const std::vector<std::pair<AudioClip, PitchAnnotation>>& synth,
                      const CqtConfig& cqt_cfg, int k_max) {
    if (synth.empty()) throw ValidationError("calibrate: empty calibration set");
    const int b = cqt_cfg.bins_per_semitone;
    CqtAnalyzer analyzer(cqt_cfg);
    std::vector<double> residuals;
    Tensor<float> in;
    Workspace<float> ws;
    for (const auto& [clip, ann] : synth) {
        const CqtSequence seq = analyzer.forward(clip);
        for (int t = 0; t < seq.n_frames; ++t) {
            const double f0 = annotation_at_nearest(ann, seq.frame_time(t), 0.5 * cqt_cfg.hop /
                                                                                cqt_cfg.sample_rate);
            if (f0 <= 0.0) continue;
            const FrameResult fr = run_frame(model, seq.frame(t), k_max, in, ws, false);
            residuals.push_back(double(b) * hz_to_semitone(f0) - double(fr.argmax));
        }
    }
    if (residuals.empty()) throw ValidationError("calibrate: no voiced calibration frames");
    std::sort(residuals.begin(), residuals.end());
    const double med = quantile(residuals, 0.5);

    Calibration cal;
    cal.p0 = int(std::llround(med));
    cal.bins_per_semitone = b;
    cal.n_frames = int(residuals.size());
    cal.residual_median_bins = med - double(cal.p0);
    cal.residual_iqr_bins = quantile(residuals, 0.75) - quantile(residuals, 0.25);
    return cal;
}

PitchTrack infer_sequence(const Network<float>& model, const Calibration& calib,
                          const CqtSequence& seq, int k_max, const InferOptions& opts) {
    if (seq.config.scale != CqtScale::db)
        throw ValidationError("infer_sequence: need dB-mode CQT");
    if (seq.n_frames < 1) throw ValidationError("infer_sequence: empty sequence");
    const double b = double(calib.bins_per_semitone);
    PitchTrack track;
    track.times.reserve(std::size_t(seq.n_frames));
    Tensor<float> in;
    Workspace<float> ws;
    for (int t = 0; t < seq.n_frames; ++t) {
        const FrameResult fr = run_frame(model, seq.frame(t), k_max, in, ws, opts.parabolic);
        const double p = (double(fr.argmax) + fr.offset + double(calib.p0)) / b;
        track.times.push_back(seq.frame_time(t));
        track.pitch_semitones.push_back(p);
        track.confidence.push_back(fr.conf);
        track.pitch_hz.push_back(fr.conf >= opts.confidence_floor ? semitone_to_hz(p) : 0.0);
    }
    return track;
}

PitchTrack infer_file(const Network<float>& model, const Calibration& calib,
                      const AudioClip& clip, const CqtConfig& cqt_cfg, int k_max,
                      const InferOptions& opts) {
    if (calib.bins_per_semitone != cqt_cfg.bins_per_semitone)
        throw ValidationError("infer_file: calibration/CQT bins-per-semitone mismatch");
    if (clip.samples.empty()) throw ValidationError("infer_file: clip shorter than one frame");
    const CqtSequence seq = cqt_forward(clip, cqt_cfg);
    return infer_sequence(model, calib, seq, k_max, opts);
}

void write_pitch_csv(const std::string& path, const PitchTrack& track) {
    std::ofstream f(path);
    if (!f) throw FormatError("write_pitch_csv: cannot open " + path + " for writing");
    f << "time,frequency,confidence\n";
    char buf[96];
    for (std::size_t i = 0; i < track.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.4f,%.3f,%.4f\n", track.times[i], track.pitch_hz[i],
                      track.confidence[i]);
        f << buf;
    }
}

} // namespace pesto
