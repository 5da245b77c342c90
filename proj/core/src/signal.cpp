#include "nrp/signal.hpp"

#include <algorithm>
#include <cmath>

namespace nrp {

RealImage min_projection(const FrameStack& stack) {
  if (stack.frames.empty()) throw Error(ErrorCode::EmptyStack, "min_projection");
  RealImage out;
  out.width = stack.width();
  out.height = stack.height();
  out.pixels.assign(stack.frames.front().pixels.begin(), stack.frames.front().pixels.end());
  for (size_t f = 1; f < stack.frames.size(); ++f) {
    const Raster& frame = stack.frames[f];
    for (size_t i = 0; i < out.pixels.size(); ++i)
      out.pixels[i] = std::min(out.pixels[i], static_cast<double>(frame.pixels[i]));
  }
  return out;
}

PerfusionSignal extract_series(const FrameStack& stack, const TdtMask& mask,
                               Phase phase, View view) {
  if (stack.frames.empty()) throw Error(ErrorCode::EmptyStack, "extract_series");
  if (mask.width != stack.width() || mask.height != stack.height())
    throw Error(ErrorCode::DimensionMismatch, "mask vs stack");
  size_t fg = mask.foreground_count();
  if (fg == 0) throw Error(ErrorCode::EmptyMask, "extract_series");

  const double max_raw = static_cast<double>(stack.max_raw());
  PerfusionSignal signal;
  signal.frame_rate = stack.frame_rate;
  signal.phase = phase;
  signal.view = view;
  signal.onset_applied = false;
  signal.values.reserve(stack.frames.size());
  for (const Raster& frame : stack.frames) {
    double sum = 0.0;
    for (size_t i = 0; i < frame.pixels.size(); ++i)
      if (mask.pixels[i] != 0) sum += 1.0 - frame.pixels[i] / max_raw;
    signal.values.push_back(sum / static_cast<double>(fg));
  }
  return signal;
}

size_t detect_onset(const PerfusionSignal& signal, double threshold) {
  if (signal.len() < 2) throw Error(ErrorCode::NoOnset, "signal too short");
  for (size_t i = 1; i < signal.len(); ++i)
    if (std::abs(signal.values[i] - signal.values[i - 1]) > threshold)
      return i + 1;  // 1-based
  throw Error(ErrorCode::NoOnset, "no first difference above threshold");
}

PerfusionSignal align_and_truncate(const PerfusionSignal& signal, double window_seconds,
                                   double onset_threshold) {
  size_t onset = detect_onset(signal, onset_threshold);
  size_t window = static_cast<size_t>(std::llround(window_seconds * signal.frame_rate));
  size_t last = std::min(signal.len(), onset - 1 + window);  // 1-based inclusive
  if (last < onset + 1)
    throw Error(ErrorCode::WindowTooShort, "fewer than 2 samples after onset");
  PerfusionSignal out = signal;
  out.values.assign(signal.values.begin() + static_cast<long>(onset) - 1,
                    signal.values.begin() + static_cast<long>(last));
  out.onset_applied = true;
  return out;
}

}  // namespace nrp
