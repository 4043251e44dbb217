#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "esr/binary_image.hpp"
#include "esr/error.hpp"
#include "json.hpp"

namespace esr {

// Canvas coordinates, y pointing down. t is milliseconds since trace start.
struct Point {
  double x = 0.0;
  double y = 0.0;
  std::int64_t t = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

// One continuous pen-down segment.
struct Stroke {
  std::vector<Point> points;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct StrokeTrace {
  std::vector<Stroke> strokes;
  int canvas_width = 0;
  int canvas_height = 0;
  friend bool operator==(const StrokeTrace&, const StrokeTrace&) = default;
};

// Validation failure that pins down the offending stroke/point.
class TraceError : public Error {
 public:
  TraceError(ErrorCode code, std::size_t stroke, std::size_t point, const std::string& what)
      : Error(code, "stroke " + std::to_string(stroke) + ", point " + std::to_string(point) + ": " +
                        what),
        stroke_(stroke),
        point_(point) {}

  std::size_t stroke_index() const noexcept { return stroke_; }
  std::size_t point_index() const noexcept { return point_; }

 private:
  std::size_t stroke_;
  std::size_t point_;
};

/// Checks every trace invariant and returns the trace unchanged. Throws
/// TraceError on the first violation, scanning strokes and points in order.
inline const StrokeTrace& validate_trace(const StrokeTrace& raw) {
  if (raw.canvas_width <= 0 || raw.canvas_height <= 0) {
    throw Error(ErrorCode::InvalidGrid, "canvas dimensions must be positive");
  }
  if (raw.strokes.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no strokes");
  for (std::size_t s = 0; s < raw.strokes.size(); ++s) {
    const auto& pts = raw.strokes[s].points;
    if (pts.empty()) throw TraceError(ErrorCode::EmptyTrace, s, 0, "stroke has no points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point& p = pts[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw TraceError(ErrorCode::NonFiniteCoordinate, s, i, "coordinate is not finite");
      }
      if (p.x < 0.0 || p.y < 0.0 || p.x > raw.canvas_width || p.y > raw.canvas_height) {
        throw TraceError(ErrorCode::OutOfBounds, s, i, "point lies outside the canvas");
      }
      if (p.t < 0 || (i > 0 && p.t < pts[i - 1].t)) {
        throw TraceError(ErrorCode::NonMonotoneTime, s, i, "timestamp decreases");
      }
    }
  }
  return raw;
}

inline double polyline_length(const Stroke& s) {
  double len = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    len += std::hypot(s.points[i].x - s.points[i - 1].x, s.points[i].y - s.points[i - 1].y);
  }
  return len;
}

/// Resamples a stroke so consecutive points are at most `spacing` apart.
/// Every input vertex is kept and each edge is cut into ceil(len/spacing)
/// equal steps, so the polyline length is unchanged. Zero-length edges add
/// no points.
inline Stroke resample_stroke(const Stroke& s, double spacing) {
  if (!std::isfinite(spacing) || spacing <= 0.0) {
    throw Error(ErrorCode::InvalidSpacing, "spacing must be positive and finite");
  }
  if (s.points.empty()) return s;
  if (polyline_length(s) == 0.0) return Stroke{{s.points.front()}};

  Stroke out;
  out.points.push_back(s.points.front());
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const Point& a = s.points[i - 1];
    const Point& b = s.points[i];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) {
      if (i + 1 == s.points.size()) out.points.back() = b;  // keep the last input point exactly
      continue;
    }
    const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(len / spacing - 1e-9)));
    for (std::int64_t k = 1; k < steps; ++k) {
      const double u = static_cast<double>(k) / static_cast<double>(steps);
      const double t = static_cast<double>(a.t) + u * static_cast<double>(b.t - a.t);
      out.points.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), static_cast<std::int64_t>(std::llround(t))});
    }
    out.points.push_back(b);
  }
  return out;
}

namespace detail {

// Integer line walk (Bresenham), 8-connected, both ends inclusive.
inline void draw_line(BinaryImage& img, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    img.set(x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

// Orientation-independent form of a stroke: the lexicographically smaller of
// the point list and its reverse (geometry only).
inline Stroke canonical_orientation(Stroke s) {
  const auto& p = s.points;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& f = p[i];
    const Point& r = p[n - 1 - i];
    if (f.x != r.x) {
      if (r.x < f.x) std::reverse(s.points.begin(), s.points.end());
      return s;
    }
    if (f.y != r.y) {
      if (r.y < f.y) std::reverse(s.points.begin(), s.points.end());
      return s;
    }
  }
  return s;
}

}  // namespace detail

/// Draws every stroke as 8-connected 1-pixel lines on a grid_w x grid_h
/// bitmap. Canvas coordinates scale onto the grid independently per axis;
/// strokes are resampled at one grid cell before the line walk.
inline BinaryImage rasterize(const StrokeTrace& t, int grid_w, int grid_h) {
  if (grid_w <= 0 || grid_h <= 0) throw Error(ErrorCode::InvalidGrid, "grid must be positive");
  if (t.canvas_width <= 0 || t.canvas_height <= 0) {
    throw Error(ErrorCode::InvalidGrid, "canvas dimensions must be positive");
  }
  BinaryImage img(grid_w, grid_h);
  const double sx = static_cast<double>(grid_w) / t.canvas_width;
  const double sy = static_cast<double>(grid_h) / t.canvas_height;
  auto cell = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::floor(v), 0.0, static_cast<double>(limit - 1)));
  };

  for (const Stroke& s : t.strokes) {
    Stroke scaled;
    scaled.points.reserve(s.points.size());
    for (const Point& p : s.points) scaled.points.push_back({p.x * sx, p.y * sy, 0});
    const Stroke dense = resample_stroke(detail::canonical_orientation(std::move(scaled)), 1.0);
    for (std::size_t i = 0; i < dense.points.size(); ++i) {
      const int x = cell(dense.points[i].x, grid_w);
      const int y = cell(dense.points[i].y, grid_h);
      if (i == 0) {
        img.set(x, y);
      } else {
        detail::draw_line(img, cell(dense.points[i - 1].x, grid_w),
                          cell(dense.points[i - 1].y, grid_h), x, y);
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Wire format: {"canvas":{"w":W,"h":H},"strokes":[{"points":[[x,y,t],...]},...]}

inline double round_millis(double v) { return std::round(v * 1000.0) / 1000.0; }

inline nlohmann::json trace_to_json(const StrokeTrace& t) {
  nlohmann::json strokes = nlohmann::json::array();
  for (const Stroke& s : t.strokes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point& p : s.points) pts.push_back({round_millis(p.x), round_millis(p.y), p.t});
    strokes.push_back({{"points", std::move(pts)}});
  }
  return {{"canvas", {{"w", t.canvas_width}, {"h", t.canvas_height}}}, {"strokes", std::move(strokes)}};
}

/// Parses the wire format. Structural problems throw SchemaViolation; the
/// result is not validated against trace invariants.
inline StrokeTrace trace_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) -> void { throw Error(ErrorCode::SchemaViolation, why); };
  if (!j.is_object()) fail("trace must be a JSON object");
  if (!j.contains("canvas") || !j["canvas"].is_object()) fail("missing object field 'canvas'");
  const auto& canvas = j["canvas"];
  if (!canvas.contains("w") || !canvas["w"].is_number_integer()) fail("canvas.w must be an integer");
  if (!canvas.contains("h") || !canvas["h"].is_number_integer()) fail("canvas.h must be an integer");
  if (!j.contains("strokes") || !j["strokes"].is_array()) fail("missing array field 'strokes'");

  StrokeTrace t;
  t.canvas_width = canvas["w"].get<int>();
  t.canvas_height = canvas["h"].get<int>();
  for (const auto& js : j["strokes"]) {
    if (!js.is_object() || !js.contains("points") || !js["points"].is_array()) {
      fail("each stroke must be an object with a 'points' array");
    }
    Stroke s;
    for (const auto& jp : js["points"]) {
      if (!jp.is_array() || jp.size() != 3 || !jp[0].is_number() || !jp[1].is_number() ||
          !jp[2].is_number_integer()) {
        fail("each point must be [x, y, t] with integer t");
      }
      s.points.push_back({jp[0].get<double>(), jp[1].get<double>(), jp[2].get<std::int64_t>()});
    }
    t.strokes.push_back(std::move(s));
  }
  return t;
}

inline StrokeTrace trace_from_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, "body is not valid JSON");
  return trace_from_json(j);
}

}  // namespace esr
