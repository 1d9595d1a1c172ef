#include "pesto/plot.hpp"

#include "pesto/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pesto {

void write_track_svg(const std::string& path, const CqtSequence& seq, const PitchTrack& track) {
    if (seq.config.scale != CqtScale::db)
        throw ValidationError("write_track_svg: need dB-mode CQT");
    if (seq.n_frames < 1) throw ValidationError("write_track_svg: empty sequence");

    const int width = 960, height = 540;
    const int cols = std::min(seq.n_frames, 320);
    const int rows = std::min(seq.config.n_bins, 160);
    const double cell_w = double(width) / cols;
    const double cell_h = double(height) / rows;

    float lo = 1e30f, hi = -1e30f;
    for (float v : seq.db) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi > lo ? hi - lo : 1.0f;

    std::ofstream f(path);
    if (!f) throw FormatError("write_track_svg: cannot open " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n";

    char buf[256];
    for (int cx = 0; cx < cols; ++cx) {
        const int t = cx * seq.n_frames / cols;
        const float* frame = seq.frame(t);
        for (int cy = 0; cy < rows; ++cy) {
            const int bin = cy * seq.config.n_bins / rows;
            const float val = (frame[bin] - lo) / span;
            const int shade = int(std::round(255.0f * std::pow(std::clamp(val, 0.0f, 1.0f), 1.5f)));
            if (shade < 8) continue; // skip near-floor cells, background is black
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                          "fill=\"rgb(%d,%d,%d)\"/>\n",
                          cx * cell_w, height - (cy + 1) * cell_h, cell_w + 0.5, cell_h + 0.5,
                          shade, int(shade * 0.8), int(64 + shade * 0.25));
            f << buf;
        }
    }

    // Pitch track overlay: bin index = b * (semitones - semitone(f_min)).
    const double p_min =
        69.0 + 12.0 * std::log2(seq.config.f_min / 440.0); // bottom bin in MIDI semitones
    const double t_max = seq.frame_time(seq.n_frames - 1);
    bool pen_down = false;
    std::string poly;
    for (std::size_t i = 0; i < track.times.size(); ++i) {
        if (track.pitch_hz[i] <= 0.0) {
            if (pen_down && !poly.empty()) {
                f << "<polyline fill=\"none\" stroke=\"#00ff88\" stroke-width=\"1.5\" points=\""
                  << poly << "\"/>\n";
                poly.clear();
            }
            pen_down = false;
            continue;
        }
        const double bin =
            (track.pitch_semitones[i] - p_min) * seq.config.bins_per_semitone;
        const double x = t_max > 0 ? track.times[i] / t_max * width : 0.0;
        const double y = height - (bin / seq.config.n_bins) * height;
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x, y);
        poly += buf;
        pen_down = true;
    }
    if (!poly.empty())
        f << "<polyline fill=\"none\" stroke=\"#00ff88\" stroke-width=\"1.5\" points=\"" << poly
          << "\"/>\n";
    f << "</svg>\n";
}

} // namespace pesto
