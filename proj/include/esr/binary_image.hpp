#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "esr/error.hpp"

namespace esr {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Fixed-grid bitmap, row-major, 1 = foreground. Reads outside the grid are
// background so neighborhood code never has to special-case the border.
class BinaryImage {
 public:
  BinaryImage(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::InvalidGrid,
                  "image dimensions must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  bool at(int x, int y) const noexcept {
    return in_bounds(x, y) && cells_[index(x, y)] != 0;
  }

  void set(int x, int y, bool value = true) {
    if (in_bounds(x, y)) cells_[index(x, y)] = value ? 1 : 0;
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  bool empty() const noexcept { return count() == 0; }

  // Foreground pixels in row-major order.
  std::vector<Pixel> foreground() const {
    std::vector<Pixel> out;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (cells_[index(x, y)]) out.push_back({x, y});
    return out;
  }

  const std::vector<std::uint8_t>& cells() const noexcept { return cells_; }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> cells_;
};

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  bool valid() const noexcept { return x1 >= x0 && y1 >= y0; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox foreground_box(const BinaryImage& img) {
  BoundingBox box{img.width(), img.height(), -1, -1};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!img.at(x, y)) continue;
      if (x < box.x0) box.x0 = x;
      if (y < box.y0) box.y0 = y;
      if (x > box.x1) box.x1 = x;
      if (y > box.y1) box.y1 = y;
    }
  }
  if (!box.valid()) return BoundingBox{};
  return box;
}

/// Plain PBM (P1). Rows are emitted one per line, pixels separated by spaces.
inline std::string to_pbm(const BinaryImage& img) {
  std::string out = "P1\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n";
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (x) out += ' ';
      out += img.at(x, y) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

inline BinaryImage from_pbm(const std::string& text) {
  std::istringstream in;
  // strip comments
  std::string cleaned;
  {
    std::istringstream raw(text);
    std::string line;
    while (std::getline(raw, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      cleaned += line;
      cleaned += '\n';
    }
  }
  in.str(cleaned);
  std::string magic;
  int w = 0, h = 0;
  if (!(in >> magic) || magic != "P1") throw Error(ErrorCode::SchemaViolation, "PBM: expected P1 header");
  if (!(in >> w >> h)) throw Error(ErrorCode::SchemaViolation, "PBM: missing dimensions");
  BinaryImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      char c = 0;
      do {
        if (!in.get(c)) throw Error(ErrorCode::TruncatedFile, "PBM: pixel data ends early");
      } while (c != '0' && c != '1');
      img.set(x, y, c == '1');
    }
  }
  return img;
}

}  // namespace esr
