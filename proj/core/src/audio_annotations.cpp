#include "pesto/audio.hpp"
#include "pesto/common.hpp"
#include "pesto/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pesto {

void PitchAnnotation::validate() const {
    if (times.size() != f0.size())
        throw ValidationError("annotation: times/f0 length mismatch for " + id);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ValidationError("annotation: times not strictly increasing at row " +
                                  std::to_string(i) + " in " + id);
        if (f0[i] < 0.0)
            throw ValidationError("annotation: negative frequency at row " + std::to_string(i) +
                                  " in " + id);
    }
}

PitchAnnotation load_annotations(const std::string& path, AnnotationFormat format,
                                 double pv_hop_s) {
    std::ifstream f(path);
    if (!f) throw FormatError("load_annotations: cannot open " + path);
    PitchAnnotation ann;
    ann.id = path;
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (format == AnnotationFormat::time_freq_csv) {
            double t, hz;
            if (std::sscanf(line.c_str(), "%lf,%lf", &t, &hz) != 2)
                throw FormatError("load_annotations: bad CSV row " + std::to_string(row) + " in " +
                                  path);
            ann.times.push_back(t);
            ann.f0.push_back(hz);
        } else {
            double semis;
            if (std::sscanf(line.c_str(), "%lf", &semis) != 1)
                throw FormatError("load_annotations: bad pv row " + std::to_string(row) + " in " +
                                  path);
            // First pv frame is centered one hop in (40 ms analysis window,
            // 20 ms hop convention).
            ann.times.push_back(pv_hop_s * double(row + 1));
            ann.f0.push_back(semis == 0.0 ? 0.0 : semitone_to_hz(semis));
        }
        ++row;
    }
    ann.validate();
    return ann;
}

void save_annotations(const std::string& path, const PitchAnnotation& ann) {
    ann.validate();
    std::ofstream f(path);
    if (!f) throw FormatError("save_annotations: cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t i = 0; i < ann.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f,%.3f\n", ann.times[i], ann.f0[i]);
        f << buf;
    }
}

double annotation_at_nearest(const PitchAnnotation& ann, double t, double max_gap) {
    if (ann.times.empty()) return 0.0;
    auto it = std::lower_bound(ann.times.begin(), ann.times.end(), t);
    std::size_t best;
    if (it == ann.times.begin()) {
        best = 0;
    } else if (it == ann.times.end()) {
        best = ann.times.size() - 1;
    } else {
        const std::size_t hi = std::size_t(it - ann.times.begin());
        best = (std::abs(ann.times[hi] - t) < std::abs(t - ann.times[hi - 1])) ? hi : hi - 1;
    }
    if (std::abs(ann.times[best] - t) > max_gap) return 0.0;
    return ann.f0[best];
}

double annotation_at_linear(const PitchAnnotation& ann, double t) {
    if (ann.times.empty()) return 0.0;
    auto it = std::upper_bound(ann.times.begin(), ann.times.end(), t);
    if (it == ann.times.begin() || it == ann.times.end()) return 0.0;
    const std::size_t hi = std::size_t(it - ann.times.begin());
    const std::size_t lo = hi - 1;
    if (ann.f0[lo] <= 0.0 || ann.f0[hi] <= 0.0) return 0.0;
    const double a = (t - ann.times[lo]) / (ann.times[hi] - ann.times[lo]);
    return ann.f0[lo] + a * (ann.f0[hi] - ann.f0[lo]);
}

} // namespace pesto
