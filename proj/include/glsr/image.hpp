// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

/// Interleaved 8-bit RGB raster, row-major.
struct ImageU8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  ImageU8(std::size_t w, std::size_t h) : width(w), height(h), pixels(3 * w * h, 0) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return pixels[3 * (y * width + x) + ch]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const { return pixels[3 * (y * width + x) + ch]; }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)

namespace detail {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  // Skips whitespace and '#' comments (to end of line).
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (std::size_t{1} << 31)) throw ParseError(std::string("ppm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("ppm: expected ") + what, start);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return b_.size() - pos_; }
  std::uint8_t peek() const { return b_[pos_]; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ImageU8 read_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("ppm: missing P6 magic", 0);
  detail::PnmReader r(bytes);
  r.advance(2);
  const std::size_t w = r.number("width");
  const std::size_t h = r.number("height");
  const std::size_t maxval_pos = r.pos();
  const std::size_t maxval = r.number("maxval");
  if (maxval != 255) throw ParseError("ppm: maxval must be 255, got " + std::to_string(maxval), maxval_pos);
  if (w == 0 || h == 0) throw ParseError("ppm: zero image dimension", maxval_pos);
  // Exactly one whitespace byte separates the header from the raster.
  if (r.remaining() == 0 || !std::isspace(r.peek())) throw ParseError("ppm: expected whitespace after maxval", r.pos());
  r.advance(1);
  const std::size_t need = 3 * w * h;
  if (r.remaining() < need) {
    throw ParseError("ppm: truncated payload, need " + std::to_string(need) + " bytes, have " + std::to_string(r.remaining()),
                     bytes.size());
  }
  ImageU8 img(w, h);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), need, img.pixels.begin());
  return img;
}

inline std::vector<std::uint8_t> write_ppm(const ImageU8& img) {
  if (img.pixels.size() != 3 * img.width * img.height) throw DimensionError("write_ppm: pixel buffer length mismatch");
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ImageU8 load_ppm(const std::string& path) {
  const auto bytes = read_file(path);
  return read_ppm(bytes);
}

inline void save_ppm(const std::string& path, const ImageU8& img) { write_file(path, write_ppm(img)); }

// ---------------------------------------------------------------------------
// Raster <-> tensor

/// (1, 3, H, W) tensor with values in [0, 1].
template <typename T>
Tensor<T> to_tensor(const ImageU8& img) {
  Tensor<T> t(Shape{1, 3, img.height, img.width});
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) t(0, c, y, x) = static_cast<T>(img.at(x, y, c)) / T(255);
  return t;
}

/// Batch element `n` of a 3-channel tensor, clamped and rounded to 8 bits.
template <typename T>
ImageU8 to_image(const Tensor<T>& t, std::size_t n = 0) {
  const Shape s = t.shape();
  if (s.c != 3 || n >= s.n) throw DimensionError("to_image: expected 3 channels, got " + s.str());
  ImageU8 img(s.w, s.h);
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(t(n, c, y, x)), 0.0, 1.0) * 255.0;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

}  // namespace glsr
