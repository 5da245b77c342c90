#pragma once

#include <filesystem>

#include "nrp/cohort.hpp"
#include "nrp/signal.hpp"

namespace nrp {

struct PatientSignals {
  PatientRecord record;
  std::map<SeqKey, PerfusionSignal> signals;  // raw, not onset-aligned
};

struct SignalCohort {
  std::vector<PatientSignals> patients;
};

/// Curve modifications applied to no-reflow post-procedure signals.
struct SynthEffect {
  double plateau_extension_s = 1.0;   // hold near peak before washout starts
  double decay_slowdown = 2.0;        // >1 slows washout, <1 speeds it up
  double peak_attenuation = 0.85;     // multiplies peak amplitude
  bool lateral_only = false;          // restrict the effect to the lateral view
};

struct SynthConfig {
  int n_patients = 39;
  double prevalence = 7.0 / 39.0;
  int seed = 0;
  double fps = 3.0;
  double duration_s = 6.0;
  double noise_sd = 0.01;
  SynthEffect effect;
  int image_size = 32;  // rasterization frame side
  int bit_depth = 8;
};

/// Gamma-variate bolus curve: 0 for t <= t0, peak value A at t = t0 + tp.
double gamma_variate(double peak_amplitude, double arrival_s, double time_to_peak_s,
                     double shape, double t_s);

/// Deterministic synthetic cohort: per-patient RNG substream derived from
/// (seed, patient index); pre curves label-independent; no-reflow post curves
/// carry the configured effect.
SignalCohort generate_cohort(const SynthConfig& cfg);

/// Writes the cohort as manifest + PGM frame stacks + masks, in the formats
/// the ingest module consumes. Each frame paints the signal value uniformly
/// inside a rectangular mask over a zero-tracer background.
void materialize_cohort(const SignalCohort& cohort, const SynthConfig& cfg,
                        const std::filesystem::path& out_dir);

}  // namespace nrp
