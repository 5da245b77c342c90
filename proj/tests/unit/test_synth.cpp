#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "nrp/pipeline.hpp"
#include "nrp/synth.hpp"

using namespace nrp;
namespace fs = std::filesystem;

TEST_CASE("gamma-variate bolus curve") {
  // zero before arrival, peak value A exactly at arrival + time-to-peak
  CHECK(gamma_variate(0.6, 1.0, 1.5, 2.0, 0.5) == doctest::Approx(0.0));
  CHECK(gamma_variate(0.6, 1.0, 1.5, 2.0, 1.0) == doctest::Approx(0.0));
  CHECK(gamma_variate(0.6, 1.0, 1.5, 2.0, 2.5) == doctest::Approx(0.6));
  // u = 1/2, shape 2: A * 0.25 * e
  CHECK(gamma_variate(1.0, 0.0, 2.0, 2.0, 1.0) == doctest::Approx(0.25 * std::exp(1.0)));
  // strictly below the peak elsewhere
  for (double t : {1.2, 1.8, 3.0, 4.5})
    CHECK(gamma_variate(0.6, 1.0, 1.5, 2.0, t) < 0.6);
  CHECK_THROWS_AS(gamma_variate(0.5, 0.0, 0.0, 2.0, 1.0), Error);
  CHECK_THROWS_AS(gamma_variate(0.5, 0.0, 1.0, -1.0, 1.0), Error);
}

TEST_CASE("cohort generation is deterministic and hits the prevalence exactly") {
  SynthConfig cfg;
  cfg.seed = 42;
  SignalCohort a = generate_cohort(cfg);
  SignalCohort b = generate_cohort(cfg);
  REQUIRE(a.patients.size() == 39);
  int positives = 0;
  for (size_t i = 0; i < a.patients.size(); ++i) {
    const PatientSignals &pa = a.patients[i], &pb = b.patients[i];
    CHECK(pa.record.id == pb.record.id);
    CHECK(pa.record.label == pb.record.label);
    CHECK(pa.record.age == pb.record.age);
    positives += pa.record.label;
    REQUIRE(pa.signals.size() == 4);
    for (const auto& [key, sig] : pa.signals) {
      CHECK(sig.values == pb.signals.at(key).values);
      CHECK(sig.values.size() == 18);  // 6 s at 3 fps
      for (double v : sig.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  CHECK(positives == 7);

  SynthConfig other = cfg;
  other.seed = 43;
  SignalCohort c = generate_cohort(other);
  bool any_diff = false;
  for (size_t i = 0; i < a.patients.size() && !any_diff; ++i)
    any_diff = a.patients[i].signals.at({Phase::Post, View::Ap}).values !=
               c.patients[i].signals.at({Phase::Post, View::Ap}).values;
  CHECK(any_diff);

  SynthConfig bad = cfg;
  bad.n_patients = 3;
  bad.prevalence = 0.01;  // rounds to zero positives
  CHECK_THROWS_AS(generate_cohort(bad), Error);
}

TEST_CASE("the no-reflow effect touches only positive post-procedure curves") {
  SynthConfig with;
  with.seed = 9;
  with.n_patients = 16;
  with.prevalence = 0.5;
  SynthConfig without = with;
  without.effect.plateau_extension_s = 0.0;
  without.effect.decay_slowdown = 1.0;
  without.effect.peak_attenuation = 1.0;  // identity effect

  SignalCohort cw = generate_cohort(with);
  SignalCohort co = generate_cohort(without);
  bool post_differs = false;
  for (size_t i = 0; i < cw.patients.size(); ++i) {
    const PatientSignals &pw = cw.patients[i], &po = co.patients[i];
    CHECK(pw.record.label == po.record.label);
    for (View v : {View::Ap, View::Lateral}) {
      CHECK(pw.signals.at({Phase::Pre, v}).values == po.signals.at({Phase::Pre, v}).values);
      if (pw.record.label == 0)
        CHECK(pw.signals.at({Phase::Post, v}).values == po.signals.at({Phase::Post, v}).values);
      else if (pw.signals.at({Phase::Post, v}).values != po.signals.at({Phase::Post, v}).values)
        post_differs = true;
    }
  }
  CHECK(post_differs);

  SynthConfig lat = with;
  lat.effect.lateral_only = true;
  SignalCohort cl = generate_cohort(lat);
  for (size_t i = 0; i < cl.patients.size(); ++i) {
    const auto& va = cl.patients[i].signals.at({Phase::Post, View::Ap}).values;
    const auto& vb = co.patients[i].signals.at({Phase::Post, View::Ap}).values;
    REQUIRE(va.size() == vb.size());
    for (size_t t = 0; t < va.size(); ++t)
      CHECK(va[t] == doctest::Approx(vb[t]).epsilon(1e-12));
  }
}

TEST_CASE("rasterized cohorts reload to within quantization error") {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.n_patients = 6;
  cfg.prevalence = 0.5;
  cfg.image_size = 16;
  SignalCohort cohort = generate_cohort(cfg);

  fs::path dir = fs::temp_directory_path() / ("nrp_test_synthio_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  materialize_cohort(cohort, cfg, dir);

  CohortManifest manifest = load_manifest(dir / "manifest.json");
  SignalCohort back = load_signal_cohort(manifest);
  REQUIRE(back.patients.size() == cohort.patients.size());
  const double quantum = 0.5 / 255.0 + 1e-12;
  for (size_t i = 0; i < back.patients.size(); ++i) {
    CHECK(back.patients[i].record.id == cohort.patients[i].record.id);
    CHECK(back.patients[i].record.label == cohort.patients[i].record.label);
    for (const auto& [key, sig] : cohort.patients[i].signals) {
      const PerfusionSignal& rsig = back.patients[i].signals.at(key);
      REQUIRE(rsig.len() == sig.len());
      CHECK(rsig.frame_rate == sig.frame_rate);
      for (size_t t = 0; t < sig.len(); ++t)
        CHECK(std::abs(rsig.values[t] - sig.values[t]) <= quantum);
    }
  }

  // 16-bit materialization round-trips more tightly
  SynthConfig deep = cfg;
  deep.bit_depth = 16;
  fs::path dir16 = dir / "deep";
  materialize_cohort(cohort, deep, dir16);
  SignalCohort back16 = load_signal_cohort(load_manifest(dir16 / "manifest.json"));
  const double quantum16 = 0.5 / 65535.0 + 1e-12;
  for (size_t i = 0; i < back16.patients.size(); ++i)
    for (const auto& [key, sig] : cohort.patients[i].signals)
      for (size_t t = 0; t < sig.len(); ++t)
        CHECK(std::abs(back16.patients[i].signals.at(key).values[t] - sig.values[t]) <= quantum16);
  fs::remove_all(dir);
}
