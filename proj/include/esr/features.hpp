#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "esr/binary_image.hpp"
#include "esr/error.hpp"
#include "esr/stroke_model.hpp"

namespace esr {

inline constexpr int kSectorCount = 12;
inline constexpr double kSectorDegrees = 30.0;

struct Centroid {
  double cx = 0.0;
  double cy = 0.0;
  friend bool operator==(const Centroid&, const Centroid&) = default;
};

// Fraction of foreground pixels per 30-degree block around the centroid.
// Block k spans [30k, 30k + 30) degrees measured from +x towards +y.
struct FeatureVector {
  std::array<double, kSectorCount> sectors{};

  double operator[](std::size_t i) const noexcept { return sectors[i]; }
  double& operator[](std::size_t i) noexcept { return sectors[i]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline Centroid centroid(const BinaryImage& img) {
  std::int64_t n = 0, sx = 0, sy = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y)) {
        ++n;
        sx += x;
        sy += y;
      }
  if (n == 0) throw Error(ErrorCode::EmptyImage, "centroid: image has no foreground");
  return {static_cast<double>(sx) / static_cast<double>(n),
          static_cast<double>(sy) / static_cast<double>(n)};
}

namespace detail {

// Sector of the offset (dx, dy). The quadrant is decided from signs alone and
// the offset is rotated into the first quadrant by exact swaps/negations, so a
// 90-degree rotation of the offset moves the result by exactly 3 blocks.
inline int sector_of_offset(double dx, double dy) {
  if (dx == 0.0 && dy == 0.0) return 0;
  int quadrant = 0;
  double u = 0.0, v = 0.0;
  if (dx > 0.0 && dy >= 0.0) {
    quadrant = 0, u = dx, v = dy;
  } else if (dx <= 0.0 && dy > 0.0) {
    quadrant = 1, u = dy, v = -dx;
  } else if (dx < 0.0 && dy <= 0.0) {
    quadrant = 2, u = -dx, v = -dy;
  } else {
    quadrant = 3, u = -dy, v = dx;
  }
  const double deg = std::atan2(v, u) * 180.0 / std::numbers::pi;
  int sub = static_cast<int>(std::floor(deg / kSectorDegrees));
  if (sub < 0) sub = 0;
  if (sub > 2) sub = 2;
  return quadrant * 3 + sub;
}

}  // namespace detail

/// Block index 0..11 of pixel (px, py) around c; the centroid itself is 0.
inline int sector_index(double px, double py, const Centroid& c) {
  return detail::sector_of_offset(px - c.cx, py - c.cy);
}

/// Sector pixel-distribution features. Offsets are taken as n*p - sum(p) in
/// integers, which has the sign and direction of p - centroid without any
/// rounding.
inline FeatureVector extract_features(const BinaryImage& img) {
  const auto pixels = img.foreground();
  if (pixels.empty()) throw Error(ErrorCode::EmptyImage, "extract_features: image has no foreground");
  const auto n = static_cast<std::int64_t>(pixels.size());
  std::int64_t sx = 0, sy = 0;
  for (const Pixel& p : pixels) {
    sx += p.x;
    sy += p.y;
  }
  std::array<std::int64_t, kSectorCount> tally{};
  for (const Pixel& p : pixels) {
    const auto dx = static_cast<double>(n * p.x - sx);
    const auto dy = static_cast<double>(n * p.y - sy);
    ++tally[static_cast<std::size_t>(detail::sector_of_offset(dx, dy))];
  }
  FeatureVector f;
  for (std::size_t k = 0; k < tally.size(); ++k) {
    f[k] = static_cast<double>(tally[k]) / static_cast<double>(n);
  }
  return f;
}

/// Direction of each consecutive move in degrees, [0, 360).
inline std::vector<double> segment_angles(const Stroke& s) {
  std::vector<double> out;
  if (s.points.size() < 2) return out;
  out.reserve(s.points.size() - 1);
  for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
    const double dy = s.points[i + 1].y - s.points[i].y;
    const double dx = s.points[i + 1].x - s.points[i].x;
    double deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    out.push_back(deg);
  }
  return out;
}

// 12 shortest round-trip decimals, comma separated.
inline std::string format_features(const FeatureVector& f) {
  std::string out;
  char buf[32];
  for (std::size_t k = 0; k < f.sectors.size(); ++k) {
    if (k) out += ',';
    auto res = std::to_chars(buf, buf + sizeof buf, f[k]);
    out.append(buf, res.ptr);
  }
  return out;
}

inline FeatureVector parse_features(std::string_view text) {
  FeatureVector f;
  std::size_t k = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (true) {
    if (k >= f.sectors.size()) throw Error(ErrorCode::SchemaViolation, "feature list has more than 12 values");
    auto res = std::from_chars(p, end, f[k]);
    if (res.ec != std::errc{}) throw Error(ErrorCode::SchemaViolation, "feature value is not a number");
    ++k;
    p = res.ptr;
    if (p == end) break;
    if (*p != ',') throw Error(ErrorCode::SchemaViolation, "features must be comma separated");
    ++p;
  }
  if (k != f.sectors.size()) throw Error(ErrorCode::SchemaViolation, "feature list needs 12 values");
  return f;
}

}  // namespace esr
