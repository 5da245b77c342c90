#include <algorithm>
#include <random>

#include "doctest.h"
#include "nrp/signal.hpp"

using namespace nrp;

namespace {

FrameStack make_stack(const std::vector<std::vector<uint16_t>>& frames, int w, int h,
                      int bit_depth = 8, double fps = 3.0) {
  FrameStack s;
  s.bit_depth = bit_depth;
  s.frame_rate = fps;
  for (const auto& f : frames) {
    Raster r;
    r.width = w;
    r.height = h;
    r.pixels = f;
    s.frames.push_back(std::move(r));
  }
  return s;
}

TdtMask full_mask(int w, int h) {
  TdtMask m;
  m.width = w;
  m.height = h;
  m.pixels.assign(static_cast<size_t>(w) * h, 1);
  return m;
}

PerfusionSignal sig(std::vector<double> v, double fps = 3.0) {
  PerfusionSignal s;
  s.values = std::move(v);
  s.frame_rate = fps;
  return s;
}

}  // namespace

TEST_CASE("min projection equals per-pixel minimum") {
  FrameStack stack = make_stack({{51, 128}, {26, 230}}, 2, 1);
  RealImage mp = min_projection(stack);
  CHECK(mp.at(0, 0) == doctest::Approx(26.0));
  CHECK(mp.at(0, 1) == doctest::Approx(128.0));

  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    int w = 1 + rng() % 5, h = 1 + rng() % 5;
    size_t nf = 1 + rng() % 6;
    std::vector<std::vector<uint16_t>> frames(nf);
    for (auto& f : frames) {
      f.resize(static_cast<size_t>(w) * h);
      for (auto& p : f) p = static_cast<uint16_t>(rng() % 256);
    }
    RealImage mp2 = min_projection(make_stack(frames, w, h));
    for (int i = 0; i < w * h; ++i) {
      double expect = frames[0][i];
      for (const auto& f : frames) expect = std::min(expect, static_cast<double>(f[i]));
      CHECK(mp2.pixels[i] == doctest::Approx(expect));
    }
  }

  CHECK_THROWS_AS(min_projection(make_stack({}, 2, 2)), Error);
}

TEST_CASE("series extraction inverts and normalizes intensities") {
  // bright frame -> no tracer; dark frame -> full tracer
  FrameStack stack = make_stack({{255, 255}, {0, 0}, {255, 127}}, 2, 1);
  PerfusionSignal s = extract_series(stack, full_mask(2, 1), Phase::Post, View::Ap);
  REQUIRE(s.len() == 3);
  CHECK(s.values[0] == doctest::Approx(0.0));
  CHECK(s.values[1] == doctest::Approx(1.0));
  CHECK(s.values[2] == doctest::Approx(0.2510).epsilon(1e-4));
  CHECK(s.phase == Phase::Post);
  CHECK(s.view == View::Ap);

  // mask restricts the mean to foreground pixels
  TdtMask half = full_mask(2, 1);
  half.pixels[0] = 0;
  PerfusionSignal sm = extract_series(stack, half, Phase::Post, View::Ap);
  CHECK(sm.values[2] == doctest::Approx(1.0 - 127.0 / 255.0));

  // 16-bit normalization uses the wider range
  FrameStack deep = make_stack({{65535, 0}}, 2, 1, 16);
  PerfusionSignal sd = extract_series(deep, full_mask(2, 1), Phase::Pre, View::Lateral);
  CHECK(sd.values[0] == doctest::Approx(0.5));

  TdtMask empty = full_mask(2, 1);
  empty.pixels.assign(2, 0);
  CHECK_THROWS_AS(extract_series(stack, empty, Phase::Post, View::Ap), Error);

  TdtMask wrong = full_mask(3, 1);
  CHECK_THROWS_AS(extract_series(stack, wrong, Phase::Post, View::Ap), Error);
}

TEST_CASE("series values stay in [0,1] and respond monotonically") {
  std::mt19937 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    int w = 2 + rng() % 4, h = 2 + rng() % 4;
    std::vector<std::vector<uint16_t>> frames(4);
    for (auto& f : frames) {
      f.resize(static_cast<size_t>(w) * h);
      for (auto& p : f) p = static_cast<uint16_t>(1 + rng() % 254);
    }
    FrameStack stack = make_stack(frames, w, h);
    PerfusionSignal s = extract_series(stack, full_mask(w, h), Phase::Post, View::Ap);
    for (double v : s.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // darkening one pixel in one frame raises that sample, leaves others alone
    FrameStack darker = stack;
    darker.frames[1].pixels[0] = 0;
    PerfusionSignal s2 = extract_series(darker, full_mask(w, h), Phase::Post, View::Ap);
    CHECK(s2.values[1] > s.values[1]);
    CHECK(s2.values[0] == doctest::Approx(s.values[0]));
  }
}

TEST_CASE("onset detection") {
  CHECK(detect_onset(sig({0.005, 0.008, 0.02, 0.5})) == 3);
  CHECK(detect_onset(sig({0.0, 0.2, 0.3})) == 2);
  // strict inequality at the threshold
  CHECK(detect_onset(sig({0.0, 0.01, 0.021})) == 3);
  // magnitude, not sign
  CHECK(detect_onset(sig({0.5, 0.4, 0.41})) == 2);
  CHECK_THROWS_AS(detect_onset(sig({0.1, 0.105, 0.11})), Error);
  CHECK_THROWS_AS(detect_onset(sig({0.3})), Error);
}

TEST_CASE("alignment truncates to the sampling window") {
  std::vector<double> v(20, 0.0);
  for (size_t i = 1; i < 20; ++i) v[i] = 0.05 * static_cast<double>(i);
  PerfusionSignal s = sig(v);  // onset at t=2, fps 3 -> 15 samples
  PerfusionSignal a = align_and_truncate(s, 5.0);
  REQUIRE(a.len() == 15);
  CHECK(a.values.front() == doctest::Approx(v[1]));
  CHECK(a.values.back() == doctest::Approx(v[15]));
  CHECK(a.onset_applied);

  // window extends past the end: keep what exists
  std::vector<double> late(12, 0.0);
  late[9] = 0.5;
  late[10] = 0.6;
  late[11] = 0.7;
  PerfusionSignal b = align_and_truncate(sig(late), 5.0);
  REQUIRE(b.len() == 3);
  CHECK(b.values[0] == doctest::Approx(0.5));

  // fewer than two samples past onset
  CHECK_THROWS_AS(align_and_truncate(sig({0.0, 0.0, 0.9}), 5.0), Error);

  // non-integer products round to nearest
  PerfusionSignal c = align_and_truncate(sig(v, 2.5), 5.0);
  CHECK(c.len() == static_cast<size_t>(std::lround(2.5 * 5.0)));  // 12.5 -> 13
}

TEST_CASE("aligned output is a contiguous slice starting at onset") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 6 + rng() % 20;
    std::vector<double> v(n);
    for (double& x : v) x = unif(rng);
    PerfusionSignal s = sig(v);
    size_t onset;
    try {
      onset = detect_onset(s);
    } catch (const Error&) {
      continue;
    }
    PerfusionSignal a;
    try {
      a = align_and_truncate(s, 5.0);
    } catch (const Error&) {
      continue;
    }
    size_t expect_len = std::min(n - (onset - 1), static_cast<size_t>(std::lround(5.0 * 3.0)));
    REQUIRE(a.len() == expect_len);
    for (size_t i = 0; i < a.len(); ++i)
      CHECK(a.values[i] == doctest::Approx(v[onset - 1 + i]).epsilon(1e-15));
  }
}
