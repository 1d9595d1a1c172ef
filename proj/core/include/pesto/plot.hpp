#pragma once

#include "pesto/cqt.hpp"
#include "pesto/pitch.hpp"

#include <string>

namespace pesto {

/// Renders the dB CQT as a downsampled heatmap with the pitch track
/// overlaid as a polyline. Plain SVG, no dependencies.
void write_track_svg(const std::string& path, const CqtSequence& seq, const PitchTrack& track);

} // namespace pesto
