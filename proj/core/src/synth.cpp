#include "nrp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nrp {

double gamma_variate(double peak_amplitude, double arrival_s, double time_to_peak_s,
                     double shape, double t_s) {
  if (peak_amplitude < 0.0 || time_to_peak_s <= 0.0 || shape <= 0.0)
    throw Error(ErrorCode::InvalidShape, "gamma_variate parameters");
  if (t_s <= arrival_s) return 0.0;
  double u = (t_s - arrival_s) / time_to_peak_s;
  return peak_amplitude * std::pow(u, shape) * std::exp(shape * (1.0 - u));
}

namespace {

struct BolusParams {
  double amplitude, arrival_s, time_to_peak_s, shape;
};

BolusParams sample_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.45, 0.70);
  std::uniform_real_distribution<double> arr(0.4, 1.2);
  std::uniform_real_distribution<double> ttp(0.8, 1.8);
  std::uniform_real_distribution<double> shp(1.5, 3.0);
  BolusParams p;
  p.amplitude = amp(rng);
  p.arrival_s = arr(rng);
  p.time_to_peak_s = ttp(rng);
  p.shape = shp(rng);
  return p;
}

double effect_curve(const BolusParams& p, const SynthEffect& effect, double t_s) {
  double peak_t = p.arrival_s + p.time_to_peak_s;
  double te = t_s;
  if (t_s > peak_t) {
    // hold near the peak for the plateau window, then washout at the
    // slowed (or sped-up) clock
    te = peak_t + std::max(0.0, t_s - peak_t - effect.plateau_extension_s) /
                      effect.decay_slowdown;
  }
  return gamma_variate(p.amplitude * effect.peak_attenuation, p.arrival_s,
                       p.time_to_peak_s, p.shape, te);
}

PerfusionSignal render_signal(const BolusParams& p, const SynthEffect* effect,
                              const SynthConfig& cfg, Phase phase, View view,
                              std::mt19937_64& rng) {
  PerfusionSignal sig;
  sig.frame_rate = cfg.fps;
  sig.phase = phase;
  sig.view = view;
  sig.onset_applied = false;
  int n_frames = static_cast<int>(std::llround(cfg.duration_s * cfg.fps));
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  for (int f = 1; f <= n_frames; ++f) {
    double t_s = static_cast<double>(f) / cfg.fps;
    double v = effect ? effect_curve(p, *effect, t_s)
                      : gamma_variate(p.amplitude, p.arrival_s, p.time_to_peak_s, p.shape, t_s);
    if (cfg.noise_sd > 0.0) v += noise(rng);
    sig.values.push_back(std::clamp(v, 0.0, 1.0));
  }
  return sig;
}

}  // namespace

SignalCohort generate_cohort(const SynthConfig& cfg) {
  if (cfg.n_patients < 1 || cfg.prevalence <= 0.0 || cfg.prevalence >= 1.0 ||
      cfg.duration_s * cfg.fps < 4.0)
    throw Error(ErrorCode::DegenerateConfig, "bad synth config");

  const int n = cfg.n_patients;
  const int n_pos = static_cast<int>(std::llround(cfg.prevalence * n));
  if (n_pos < 1 || n_pos >= n)
    throw Error(ErrorCode::DegenerateConfig, "prevalence yields a single-class cohort");

  // label placement from the cohort-level stream; everything else per patient
  std::vector<int> labels(static_cast<size_t>(n), 0);
  std::fill(labels.begin(), labels.begin() + n_pos, 1);
  std::mt19937_64 cohort_rng(static_cast<uint64_t>(cfg.seed) * 0x9e3779b97f4a7c15ULL + 1ULL);
  std::shuffle(labels.begin(), labels.end(), cohort_rng);

  SignalCohort cohort;
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{cfg.seed, i};
    std::mt19937_64 rng(0);
    {
      std::vector<uint32_t> state(2);
      seq.generate(state.begin(), state.end());
      rng.seed((static_cast<uint64_t>(state[0]) << 32) | state[1]);
    }

    PatientSignals ps;
    char id[16];
    std::snprintf(id, sizeof(id), "p%03d", i + 1);
    ps.record.id = id;
    ps.record.label = labels[static_cast<size_t>(i)];
    std::uniform_real_distribution<double> age(55.0, 90.0);
    std::uniform_int_distribution<int> nihss(5, 25);
    std::uniform_int_distribution<int> passes(1, 4);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> race(0, 2);
    ps.record.age = age(rng);
    ps.record.sex = coin(rng) == 0 ? Sex::Female : Sex::Male;
    ps.record.mtici = coin(rng) == 0 ? Mtici::TwoC : Mtici::Three;
    ps.record.nihss = nihss(rng);
    ps.record.passes = passes(rng);
    static const char* kRaces[3] = {"white", "black", "other"};
    ps.record.race = kRaces[race(rng)];

    for (View view : {View::Ap, View::Lateral}) {
      BolusParams pre_params = sample_params(rng);
      BolusParams post_params = sample_params(rng);
      ps.signals[{Phase::Pre, view}] =
          render_signal(pre_params, nullptr, cfg, Phase::Pre, view, rng);
      bool apply = ps.record.label == 1 && (!cfg.effect.lateral_only || view == View::Lateral);
      ps.signals[{Phase::Post, view}] =
          render_signal(post_params, apply ? &cfg.effect : nullptr, cfg, Phase::Post, view, rng);
    }
    cohort.patients.push_back(std::move(ps));
  }
  return cohort;
}

void materialize_cohort(const SignalCohort& cohort, const SynthConfig& cfg,
                        const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int side = cfg.image_size;
  const uint16_t max_raw = static_cast<uint16_t>((1u << cfg.bit_depth) - 1u);

  // one rectangular TDT per patient, centered
  TdtMask mask;
  mask.width = side;
  mask.height = side;
  mask.pixels.assign(static_cast<size_t>(side) * side, 0);
  int lo = side / 4, hi = 3 * side / 4;
  for (int r = lo; r < hi; ++r)
    for (int c = lo; c < hi; ++c) mask.pixels[static_cast<size_t>(r) * side + c] = 1;

  CohortManifest manifest;
  manifest.frame_rate_default = cfg.fps;
  manifest.bit_depth_default = cfg.bit_depth;
  manifest.base_dir = out_dir;

  for (const PatientSignals& ps : cohort.patients) {
    PatientRecord rec = ps.record;
    rec.sequences.clear();
    rec.masks.clear();
    fs::create_directories(out_dir / rec.id);
    for (const auto& [key, sig] : ps.signals) {
      fs::path seq_dir = fs::path(rec.id) / key.str();
      fs::create_directories(out_dir / seq_dir);
      for (size_t f = 0; f < sig.values.size(); ++f) {
        Raster frame;
        frame.width = side;
        frame.height = side;
        // inverted convention on disk: raw = (1 - tracer) * max, background max
        uint16_t fg_raw = static_cast<uint16_t>(
            std::llround((1.0 - sig.values[f]) * static_cast<double>(max_raw)));
        frame.pixels.assign(static_cast<size_t>(side) * side, max_raw);
        for (size_t i = 0; i < mask.pixels.size(); ++i)
          if (mask.pixels[i]) frame.pixels[i] = fg_raw;
        char name[24];
        std::snprintf(name, sizeof(name), "frame_%03zu.pgm", f + 1);
        write_pgm(out_dir / seq_dir / name, frame, cfg.bit_depth);
      }
      fs::path mask_path = fs::path(rec.id) / (key.str() + "_mask.pgm");
      write_mask(out_dir / mask_path, mask);
      SequenceRef ref;
      ref.dir = seq_dir;
      rec.sequences[key] = ref;
      rec.masks[key] = mask_path;
    }
    manifest.patients.push_back(std::move(rec));
  }
  save_manifest(manifest, out_dir / "manifest.json");
}

}  // namespace nrp
