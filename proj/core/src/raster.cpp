#include "nrp/raster.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nrp {

size_t TdtMask::foreground_count() const {
  return static_cast<size_t>(std::count_if(pixels.begin(), pixels.end(),
                                           [](uint8_t p) { return p != 0; }));
}

namespace {

// Skips whitespace and '#' comment lines in a PGM header.
int next_header_int(std::istream& in, const std::filesystem::path& path) {
  while (true) {
    int c = in.peek();
    if (c == EOF) throw Error(ErrorCode::ParseError, "truncated PGM header in " + path.string());
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw Error(ErrorCode::ParseError, "bad PGM header token in " + path.string());
  return value;
}

}  // namespace

Raster read_pgm(const std::filesystem::path& path, int& bit_depth_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());

  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw Error(ErrorCode::ParseError, "expected P5 PGM: " + path.string());

  int width = next_header_int(in, path);
  int height = next_header_int(in, path);
  int maxval = next_header_int(in, path);
  in.get();  // single whitespace after maxval

  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::ParseError, "bad PGM dimensions in " + path.string());
  if (maxval == 255) {
    bit_depth_out = 8;
  } else if (maxval == 65535) {
    bit_depth_out = 16;
  } else {
    throw Error(ErrorCode::UnsupportedBitDepth,
                "maxval " + std::to_string(maxval) + " in " + path.string());
  }

  Raster img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<size_t>(width) * height);

  if (bit_depth_out == 8) {
    std::vector<uint8_t> raw(img.pixels.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw Error(ErrorCode::ParseError, "truncated pixel data in " + path.string());
    std::copy(raw.begin(), raw.end(), img.pixels.begin());
  } else {
    std::vector<uint8_t> raw(img.pixels.size() * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw Error(ErrorCode::ParseError, "truncated pixel data in " + path.string());
    for (size_t i = 0; i < img.pixels.size(); ++i)
      img.pixels[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Raster& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw Error(ErrorCode::UnsupportedBitDepth, std::to_string(bit_depth));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  int maxval = bit_depth == 8 ? 255 : 65535;
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  if (bit_depth == 8) {
    std::vector<uint8_t> raw(img.pixels.size());
    std::copy(img.pixels.begin(), img.pixels.end(), raw.begin());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<uint8_t> raw(img.pixels.size() * 2);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      raw[2 * i] = static_cast<uint8_t>(img.pixels[i] >> 8);
      raw[2 * i + 1] = static_cast<uint8_t>(img.pixels[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

TdtMask read_mask(const std::filesystem::path& path) {
  int bit_depth = 0;
  Raster img = read_pgm(path, bit_depth);
  TdtMask mask;
  mask.width = img.width;
  mask.height = img.height;
  mask.pixels.resize(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), mask.pixels.begin(),
                 [](uint16_t p) { return p != 0 ? uint8_t{1} : uint8_t{0}; });
  if (mask.foreground_count() == 0)
    throw Error(ErrorCode::EmptyMask, path.string());
  return mask;
}

void write_mask(const std::filesystem::path& path, const TdtMask& mask) {
  Raster img;
  img.width = mask.width;
  img.height = mask.height;
  img.pixels.resize(mask.pixels.size());
  std::transform(mask.pixels.begin(), mask.pixels.end(), img.pixels.begin(),
                 [](uint8_t p) { return p != 0 ? uint16_t{255} : uint16_t{0}; });
  write_pgm(path, img, 8);
}

}  // namespace nrp
