#pragma once

#include <vector>

#include "nrp/cohort.hpp"
#include "nrp/raster.hpp"

namespace nrp {

/// Normalized tracer time-intensity curve. values[i] is sample t = i+1;
/// higher value = more tracer (post-inversion convention).
struct PerfusionSignal {
  std::vector<double> values;
  double frame_rate = 3.0;
  Phase phase = Phase::Post;
  View view = View::Lateral;
  bool onset_applied = false;

  size_t len() const { return values.size(); }
};

/// Pixel-wise minimum over frames of the raw (pre-inversion) stack.
RealImage min_projection(const FrameStack& stack);

/// Masked mean of inverted, bit-depth-normalized intensities per frame.
PerfusionSignal extract_series(const FrameStack& stack, const TdtMask& mask,
                               Phase phase, View view);

/// Smallest t >= 2 (1-based) whose backward first difference exceeds the
/// threshold in absolute value. Throws NoOnset when none does.
size_t detect_onset(const PerfusionSignal& signal, double threshold = 0.01);

/// Truncates to [onset, onset - 1 + round(window_seconds * frame_rate)].
PerfusionSignal align_and_truncate(const PerfusionSignal& signal,
                                   double window_seconds = 5.0,
                                   double onset_threshold = 0.01);

}  // namespace nrp
