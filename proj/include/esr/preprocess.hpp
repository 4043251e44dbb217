#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "esr/binary_image.hpp"
#include "esr/error.hpp"

namespace esr {

inline constexpr int kNormalizedSize = 64;
inline constexpr int kNormalizedExtent = 56;  // long side of the glyph box after normalize

/// Scales the foreground bounding box (aspect preserved, nearest neighbor) so
/// its longer side is 56 and centers it on a 64x64 grid. A 1x1 box keeps
/// scale 1 and lands on (32, 32).
inline BinaryImage normalize(const BinaryImage& img) {
  const BoundingBox box = foreground_box(img);
  if (!box.valid()) throw Error(ErrorCode::EmptyImage, "normalize: image has no foreground");

  const int w = box.width();
  const int h = box.height();
  const int longest = std::max(w, h);
  int out_w = 1, out_h = 1;
  if (longest > 1) {
    const double scale = static_cast<double>(kNormalizedExtent) / longest;
    out_w = std::max(1, static_cast<int>(std::lround(w * scale)));
    out_h = std::max(1, static_cast<int>(std::lround(h * scale)));
    if (w >= h) out_w = kNormalizedExtent;
    if (h >= w) out_h = kNormalizedExtent;
  }
  const int off_x = (kNormalizedSize - out_w + 1) / 2;
  const int off_y = (kNormalizedSize - out_h + 1) / 2;

  BinaryImage out(kNormalizedSize, kNormalizedSize);
  // Backward sampling fills every output cell when enlarging.
  for (int j = 0; j < out_h; ++j) {
    const int sy = box.y0 + std::min(h - 1, static_cast<int>((j + 0.5) * h / out_h));
    for (int i = 0; i < out_w; ++i) {
      const int sx = box.x0 + std::min(w - 1, static_cast<int>((i + 0.5) * w / out_w));
      if (img.at(sx, sy)) out.set(off_x + i, off_y + j);
    }
  }
  // Forward mapping keeps every source pixel represented when shrinking.
  for (int y = box.y0; y <= box.y1; ++y) {
    const int oy = std::min(out_h - 1, static_cast<int>((y - box.y0 + 0.5) * out_h / h));
    for (int x = box.x0; x <= box.x1; ++x) {
      if (!img.at(x, y)) continue;
      const int ox = std::min(out_w - 1, static_cast<int>((x - box.x0 + 0.5) * out_w / w));
      out.set(off_x + ox, off_y + oy);
    }
  }
  return out;
}

namespace detail {

// Neighbor offsets counter-clockwise from east, in image coordinates (y down):
// E, NE, N, NW, W, SW, S, SE.
inline constexpr std::array<int, 8> kRingDx = {1, 1, 0, -1, -1, -1, 0, 1};
inline constexpr std::array<int, 8> kRingDy = {0, -1, -1, -1, 0, 1, 1, 1};

inline std::array<int, 8> ring(const BinaryImage& img, int x, int y) {
  std::array<int, 8> r{};
  for (int k = 0; k < 8; ++k) r[k] = img.at(x + kRingDx[k], y + kRingDy[k]) ? 1 : 0;
  return r;
}

// Yokoi connectivity number for 8-connected foreground. A border pixel whose
// deletion preserves topology has exactly 1.
inline int connectivity_number(const std::array<int, 8>& r) {
  int n = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - r[k];
    const int b = 1 - r[(k + 1) % 8];
    const int c = 1 - r[(k + 2) % 8];
    n += a - a * b * c;
  }
  return n;
}

inline bool removable(const BinaryImage& img, int x, int y) {
  const auto r = ring(img, x, y);
  int neighbors = 0;
  for (int v : r) neighbors += v;
  if (neighbors <= 1) return false;  // isolated points and stroke ends stay
  return connectivity_number(r) == 1;
}

enum class Side { North, East, South, West };

}  // namespace detail

/// Number of 8-connected foreground components.
inline int count_components(const BinaryImage& img) {
  std::vector<std::uint8_t> seen(img.cells().size(), 0);
  std::vector<Pixel> stack;
  int components = 0;
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      if (!img.at(x, y) || seen[static_cast<std::size_t>(y * w + x)]) continue;
      ++components;
      seen[static_cast<std::size_t>(y * w + x)] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int k = 0; k < 8; ++k) {
          const int nx = p.x + detail::kRingDx[k];
          const int ny = p.y + detail::kRingDy[k];
          if (!img.at(nx, ny)) continue;
          auto& s = seen[static_cast<std::size_t>(ny * w + nx)];
          if (s) continue;
          s = 1;
          stack.push_back({nx, ny});
        }
      }
    }
  }
  return components;
}

inline bool has_solid_2x2(const BinaryImage& img) {
  for (int y = 0; y + 1 < img.height(); ++y)
    for (int x = 0; x + 1 < img.width(); ++x)
      if (img.at(x, y) && img.at(x + 1, y) && img.at(x, y + 1) && img.at(x + 1, y + 1)) return true;
  return false;
}

namespace detail {

inline int count_2x2(const BinaryImage& img) {
  int n = 0;
  for (int y = 0; y + 1 < img.height(); ++y)
    for (int x = 0; x + 1 < img.width(); ++x)
      n += img.at(x, y) && img.at(x + 1, y) && img.at(x, y + 1) && img.at(x + 1, y + 1);
  return n;
}

// Breaks the first 2x2 foreground block (row-major). Tries its pixels in the
// order top-left, top-right, bottom-left, bottom-right:
//  1. delete the pixel if the component count stays the same;
//  2. otherwise, where each corner carries its own arm (two diagonals
//     crossing between pixel centers), delete it and restore one of its two
//     outward 4-neighbors from `source`, if that keeps the component count
//     and lowers the number of 2x2 blocks.
// Returns whether the image changed.
inline bool break_one_block(BinaryImage& img, const BinaryImage& source) {
  for (int y = 0; y + 1 < img.height(); ++y)
    for (int x = 0; x + 1 < img.width(); ++x) {
      if (!(img.at(x, y) && img.at(x + 1, y) && img.at(x, y + 1) && img.at(x + 1, y + 1))) continue;
      const int components = count_components(img);
      const std::array<Pixel, 4> corner = {Pixel{x, y}, Pixel{x + 1, y}, Pixel{x, y + 1}, Pixel{x + 1, y + 1}};
      const std::array<int, 4> out_dx = {-1, 1, -1, 1};
      const std::array<int, 4> out_dy = {-1, -1, 1, 1};
      for (const Pixel& p : corner) {
        img.set(p.x, p.y, false);
        if (count_components(img) == components) return true;
        img.set(p.x, p.y, true);
      }
      const int blocks = count_2x2(img);
      for (std::size_t k = 0; k < corner.size(); ++k) {
        const Pixel p = corner[k];
        for (const Pixel q : {Pixel{p.x, p.y + out_dy[k]}, Pixel{p.x + out_dx[k], p.y}}) {
          if (img.at(q.x, q.y) || !source.at(q.x, q.y)) continue;
          img.set(p.x, p.y, false);
          img.set(q.x, q.y, true);
          if (count_components(img) == components && count_2x2(img) < blocks) return true;
          img.set(q.x, q.y, false);
          img.set(p.x, p.y, true);
        }
      }
    }
  return false;
}

}  // namespace detail

namespace detail {

// One N/E/S/W cycle. Each sub-pass collects the pixels whose neighbor on that
// side is background, then deletes them one at a time while removable.
inline bool directional_cycle(BinaryImage& img, std::vector<Pixel>& border) {
  constexpr std::array<Side, 4> order = {Side::North, Side::East, Side::South, Side::West};
  bool changed = false;
  for (Side side : order) {
    int dx = 0, dy = 0;
    switch (side) {
      case Side::North: dy = -1; break;
      case Side::East: dx = 1; break;
      case Side::South: dy = 1; break;
      case Side::West: dx = -1; break;
    }
    border.clear();
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        if (img.at(x, y) && !img.at(x + dx, y + dy)) border.push_back({x, y});
    for (const Pixel& p : border) {
      if (removable(img, p.x, p.y)) {
        img.set(p.x, p.y, false);
        changed = true;
      }
    }
  }
  return changed;
}

}  // namespace detail

/// Directional thinning: N/E/S/W cycles of border deletion that keep
/// 8-connectivity and stroke ends, until a cycle deletes nothing. A 2x2
/// block still left is then broken (see detail::break_one_block; this may
/// open a one-pixel hole) and the cycles resume.
inline BinaryImage thin(const BinaryImage& img) {
  BinaryImage out = img;
  std::vector<Pixel> border;
  do {
    while (detail::directional_cycle(out, border)) {
    }
  } while (detail::break_one_block(out, img));
  return out;
}

}  // namespace esr
