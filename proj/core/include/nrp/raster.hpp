#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nrp/errors.hpp"

namespace nrp {

/// Row-major 2D raster of 16-bit samples. 8-bit data is stored widened;
/// the owning FrameStack records the true bit depth.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> pixels;  // height * width

  uint16_t at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
  uint16_t& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
  size_t size() const { return pixels.size(); }
};

struct FrameStack {
  std::vector<Raster> frames;
  int bit_depth = 8;  // 8 or 16
  double frame_rate = 3.0;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  uint16_t max_raw() const { return static_cast<uint16_t>((1u << bit_depth) - 1u); }
};

/// Binary region-of-interest mask; nonzero pixels are foreground.
struct TdtMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  bool foreground(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col] != 0; }
  size_t foreground_count() const;
};

/// Real-valued raster (min-projection output and raster exports).
struct RealImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
};

// Binary PGM (P5) I/O. maxval 255 -> bit depth 8, maxval 65535 -> bit depth 16
// (16-bit samples big-endian per the format).
Raster read_pgm(const std::filesystem::path& path, int& bit_depth_out);
void write_pgm(const std::filesystem::path& path, const Raster& img, int bit_depth);

TdtMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const TdtMask& mask);

}  // namespace nrp
