#include "pesto/eval.hpp"

#include "pesto/common.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pesto {

PairCounts count_hits(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s) {
    PairCounts pc;
    for (std::size_t i = 0; i < pred.times.size(); ++i) {
        const double f0 = annotation_at_nearest(truth, pred.times[i], max_gap_s);
        if (f0 <= 0.0) continue;
        ++pc.n_voiced;
        const double err = std::abs(pred.pitch_semitones[i] - hz_to_semitone(f0));
        if (err < kPitchThresholdSemitones) ++pc.n_pitch_ok;
        const double m = std::fmod(err, 12.0);
        const double chroma = std::min(m, 12.0 - m);
        if (chroma < kPitchThresholdSemitones) ++pc.n_chroma_ok;
    }
    return pc;
}

double rpa(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s) {
    const PairCounts pc = count_hits(pred, truth, max_gap_s);
    if (pc.n_voiced == 0) throw ValidationError("rpa: no voiced frames");
    return double(pc.n_pitch_ok) / double(pc.n_voiced);
}

double rca(const PitchTrack& pred, const PitchAnnotation& truth, double max_gap_s) {
    const PairCounts pc = count_hits(pred, truth, max_gap_s);
    if (pc.n_voiced == 0) throw ValidationError("rca: no voiced frames");
    return double(pc.n_chroma_ok) / double(pc.n_voiced);
}

EvalReport evaluate_clips(const Network<float>& model, const Calibration& calib,
                          const std::vector<std::pair<AudioClip, PitchAnnotation>>& data,
                          const CqtConfig& cqt_cfg, int k_max, double max_gap_s,
                          const InferOptions& opts) {
    if (data.empty()) throw ValidationError("evaluate_clips: no clips");
    CqtAnalyzer analyzer(cqt_cfg);
    EvalReport rep;
    std::size_t ok_pitch = 0, ok_chroma = 0;
    for (const auto& [clip, truth] : data) {
        const CqtSequence seq = analyzer.forward(clip);
        const PitchTrack track = infer_sequence(model, calib, seq, k_max, opts);
        const PairCounts pc = count_hits(track, truth, max_gap_s);
        EvalReport::ClipRow row;
        row.id = clip.id;
        row.n_voiced = pc.n_voiced;
        row.rpa = pc.n_voiced ? double(pc.n_pitch_ok) / double(pc.n_voiced) : 0.0;
        row.rca = pc.n_voiced ? double(pc.n_chroma_ok) / double(pc.n_voiced) : 0.0;
        rep.per_clip.push_back(row);
        rep.n_voiced += pc.n_voiced;
        ok_pitch += pc.n_pitch_ok;
        ok_chroma += pc.n_chroma_ok;
    }
    if (rep.n_voiced == 0) throw ValidationError("evaluate_clips: no voiced frames");
    rep.rpa = double(ok_pitch) / double(rep.n_voiced);
    rep.rca = double(ok_chroma) / double(rep.n_voiced);
    return rep;
}

AudioClip mix_at_snr(const AudioClip& vocals, const AudioClip& background,
                     const PitchAnnotation& truth, double snr_db) {
    if (vocals.sample_rate != background.sample_rate)
        throw ValidationError("mix_at_snr: sample-rate mismatch");
    const std::size_t n = std::min(vocals.samples.size(), background.samples.size());
    if (n == 0) throw ValidationError("mix_at_snr: empty stems");

    if (std::isinf(snr_db)) return vocals; // clean

    // Power over samples belonging to truth-voiced 10 ms frames.
    const double frame_s = 0.010;
    double pv = 0.0, pb = 0.0;
    std::size_t nv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / vocals.sample_rate;
        if (annotation_at_nearest(truth, t, frame_s) <= 0.0) continue;
        pv += double(vocals.samples[i]) * vocals.samples[i];
        pb += double(background.samples[i]) * background.samples[i];
        ++nv;
    }
    if (nv == 0) throw ValidationError("mix_at_snr: no voiced frames in truth");
    if (pb <= 0.0) throw ValidationError("mix_at_snr: background power is zero");
    const double scale = std::sqrt(pv / pb) * std::pow(10.0, -snr_db / 20.0);

    AudioClip out;
    out.sample_rate = vocals.sample_rate;
    out.id = vocals.id + "+bg";
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.samples[i] = vocals.samples[i] + float(scale) * background.samples[i];
    return out;
}

std::vector<std::pair<double, EvalReport>> snr_sweep(
    const Network<float>& model, const Calibration& calib, const std::vector<StemPair>& pairs,
    const std::vector<double>& snr_db_list, const CqtConfig& cqt_cfg, int k_max,
    double max_gap_s, const InferOptions& opts) {
    if (pairs.empty()) throw ValidationError("snr_sweep: no stem pairs");
    std::vector<std::pair<double, EvalReport>> out;
    for (double snr : snr_db_list) {
        std::vector<std::pair<AudioClip, PitchAnnotation>> mixed;
        mixed.reserve(pairs.size());
        for (const auto& p : pairs)
            mixed.emplace_back(mix_at_snr(p.vocals, p.background, p.truth, snr), p.truth);
        out.emplace_back(snr, evaluate_clips(model, calib, mixed, cqt_cfg, k_max, max_gap_s, opts));
    }
    return out;
}

void write_eval_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::json j;
    j["rpa"] = report.rpa;
    j["rca"] = report.rca;
    j["n_voiced"] = report.n_voiced;
    j["fingerprint"] = report.fingerprint;
    auto& clips = j["per_clip"] = nlohmann::json::array();
    for (const auto& row : report.per_clip)
        clips.push_back({{"id", row.id}, {"rpa", row.rpa}, {"rca", row.rca},
                         {"n_voiced", row.n_voiced}});
    std::ofstream f(path);
    if (!f) throw FormatError("write_eval_report_json: cannot open " + path);
    f << j.dump(2) << '\n';
}

void write_eval_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream f(path);
    if (!f) throw FormatError("write_eval_report_csv: cannot open " + path);
    f << "id,rpa,rca,n_voiced\n";
    char buf[128];
    for (const auto& row : report.per_clip) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu\n", row.rpa, row.rca, row.n_voiced);
        f << row.id << ',' << buf;
    }
}

} // namespace pesto
