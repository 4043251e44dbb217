#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "esr/corpus.hpp"
#include "esr/error.hpp"
#include "esr/features.hpp"
#include "esr/neuralnet.hpp"
#include "esr/preprocess.hpp"
#include "esr/stroke_model.hpp"
#include "json.hpp"

namespace esr {

struct SegmentationParams {
  double char_gap_ratio = 0.35;
  double word_gap_ratio = 1.0;
  double overlap_merge_ratio = 0.3;

  void validate() const {
    if (!(char_gap_ratio > 0.0 && char_gap_ratio < word_gap_ratio))
      throw Error(ErrorCode::InvalidConfig, "need 0 < char_gap_ratio < word_gap_ratio");
    if (!(overlap_merge_ratio >= 0.0)) throw Error(ErrorCode::InvalidConfig, "overlap_merge_ratio must be >= 0");
  }
};

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double width() const noexcept { return x1 - x0; }
  friend bool operator==(const Box&, const Box&) = default;
};

inline Box trace_box(const std::vector<Stroke>& strokes) {
  Box b{1e300, 1e300, -1e300, -1e300};
  for (const auto& s : strokes)
    for (const auto& p : s.points) {
      b.x0 = std::min(b.x0, p.x);
      b.y0 = std::min(b.y0, p.y);
      b.x1 = std::max(b.x1, p.x);
      b.y1 = std::max(b.y1, p.y);
    }
  return b;
}

// Strokes are treated as one canvas pixel wide when measuring horizontal
// extent, so a vertical stem still overlaps the bar it crosses.
inline constexpr double kPenWidth = 1.0;

struct CharacterGroup {
  StrokeTrace trace;              // the group's strokes on the original canvas
  std::vector<int> stroke_ids;    // indices into the source trace
  Box box;
  bool word_start = false;        // separated from its left neighbor by a word gap
};

namespace detail {

inline double group_width(const Box& b) { return b.width() + kPenWidth; }

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Cluster {
  std::vector<int> ids;
  Box box;
};

inline Box merge_box(const Box& a, const Box& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

}  // namespace detail

/// Groups strokes into characters, left to right.
///  1. Strokes (then groups) whose horizontal overlap exceeds
///     overlap_merge_ratio x the narrower width merge, until stable.
///  2. Neighbors closer than char_gap_ratio x median width merge.
///  3. A gap wider than word_gap_ratio x median width starts a new word.
inline std::vector<CharacterGroup> segment_characters(const StrokeTrace& t, const SegmentationParams& p) {
  p.validate();
  using detail::Cluster;
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < t.strokes.size(); ++i) {
    if (t.strokes[i].points.empty()) continue;
    clusters.push_back({{static_cast<int>(i)}, trace_box({t.strokes[i]})});
  }

  auto overlaps = [&](const Cluster& a, const Cluster& b) {
    const double lo = std::max(a.box.x0, b.box.x0) - 0.5 * kPenWidth;
    const double hi = std::min(a.box.x1, b.box.x1) + 0.5 * kPenWidth;
    const double overlap = hi - lo;
    const double narrow = std::min(detail::group_width(a.box), detail::group_width(b.box));
    return overlap > p.overlap_merge_ratio * narrow;
  };
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        if (!overlaps(clusters[i], clusters[j])) continue;
        clusters[i].ids.insert(clusters[i].ids.end(), clusters[j].ids.begin(), clusters[j].ids.end());
        clusters[i].box = detail::merge_box(clusters[i].box, clusters[j].box);
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.box.x0 < b.box.x0; });

  auto gap = [](const Cluster& left, const Cluster& right) { return right.box.x0 - left.box.x1 - kPenWidth; };
  auto median_width = [](const std::vector<Cluster>& cs) {
    std::vector<double> w;
    for (const auto& c : cs) w.push_back(detail::group_width(c.box));
    return detail::median(std::move(w));
  };

  if (!clusters.empty()) {
    const double close = p.char_gap_ratio * median_width(clusters);
    std::vector<Cluster> joined{clusters.front()};
    for (std::size_t i = 1; i < clusters.size(); ++i) {
      Cluster& last = joined.back();
      if (gap(last, clusters[i]) < close) {
        last.ids.insert(last.ids.end(), clusters[i].ids.begin(), clusters[i].ids.end());
        last.box = detail::merge_box(last.box, clusters[i].box);
      } else {
        joined.push_back(clusters[i]);
      }
    }
    clusters = std::move(joined);
  }

  std::vector<CharacterGroup> groups;
  const double word_gap = clusters.empty() ? 0.0 : p.word_gap_ratio * median_width(clusters);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto& c = clusters[i];
    std::sort(c.ids.begin(), c.ids.end());
    CharacterGroup g;
    g.trace.canvas_width = t.canvas_width;
    g.trace.canvas_height = t.canvas_height;
    for (int id : c.ids) g.trace.strokes.push_back(t.strokes[static_cast<std::size_t>(id)]);
    g.stroke_ids = c.ids;
    g.box = c.box;
    g.word_start = i == 0 || gap(clusters[i - 1], c) > word_gap;
    groups.push_back(std::move(g));
  }
  return groups;
}

// ---------------------------------------------------------------------------

inline constexpr int kGlyphRaster = kNormalizedExtent;  // rasterize grid for one character

/// Character strokes fitted (aspect preserved) into a 56x56 canvas and
/// rasterized 1:1, so normalize only has to center the result. Fitted
/// coordinates snap to a 1e-6 grid; otherwise a translated copy of the same
/// strokes can land an ulp on the other side of a cell edge.
inline BinaryImage character_image(const std::vector<Stroke>& strokes) {
  if (strokes.empty()) throw Error(ErrorCode::EmptyImage, "character has no strokes");
  const Box b = trace_box(strokes);
  const double extent = std::max(b.x1 - b.x0, b.y1 - b.y0);
  const double scale = extent > 0.0 ? (kGlyphRaster - 1) / extent : 0.0;
  StrokeTrace fitted;
  fitted.canvas_width = kGlyphRaster;
  fitted.canvas_height = kGlyphRaster;
  for (const auto& s : strokes) {
    Stroke f;
    auto snap = [](double v) { return std::round(v * 1e6) / 1e6; };
    for (const auto& p : s.points) f.points.push_back({snap((p.x - b.x0) * scale), snap((p.y - b.y0) * scale), p.t});
    fitted.strokes.push_back(std::move(f));
  }
  return rasterize(fitted, kGlyphRaster, kGlyphRaster);
}

struct GlyphAnalysis {
  BinaryImage skeleton{1, 1};
  FeatureVector features;
};

/// rasterize -> normalize -> thin -> extract_features for one character.
inline GlyphAnalysis analyze_glyph(const std::vector<Stroke>& strokes) {
  GlyphAnalysis a;
  a.skeleton = thin(normalize(character_image(strokes)));
  a.features = extract_features(a.skeleton);
  return a;
}

inline FeatureVector glyph_features(const StrokeTrace& glyph) { return analyze_glyph(glyph.strokes).features; }

// ---------------------------------------------------------------------------

struct CharResult {
  char tag = 'A';
  double confidence = 0.0;
  Box bbox;
  std::vector<int> stroke_ids;
};

struct CharDebug {
  std::string pbm;
  FeatureVector features;
};

struct SentenceResult {
  std::vector<std::vector<CharResult>> words;
  std::string text;
  std::vector<std::string> warnings;
  std::vector<CharDebug> debug;  // one per character when requested

  std::size_t char_count() const {
    std::size_t n = 0;
    for (const auto& w : words) n += w.size();
    return n;
  }
};

inline std::string render_text(const std::vector<std::vector<CharResult>>& words) {
  std::string text;
  for (const auto& w : words) {
    if (w.empty()) continue;
    if (!text.empty()) text += ' ';
    for (const auto& c : w) text += c.tag;
  }
  return text;
}

inline SentenceResult recognize_sentence(const StrokeTrace& t, const MlpModel& m, const SegmentationParams& p,
                                         bool debug = false) {
  validate_trace(t);
  SentenceResult r;
  const auto groups = segment_characters(t, p);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GlyphAnalysis a;
    try {
      a = analyze_glyph(groups[g].trace.strokes);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyImage) throw;
      r.warnings.push_back("group " + std::to_string(g) + " skipped: " + std::string(e.name()));
      continue;
    }
    const Classification c = classify(m, a.features);
    if (groups[g].word_start || r.words.empty()) r.words.emplace_back();
    r.words.back().push_back({c.tag, c.confidence, groups[g].box, groups[g].stroke_ids});
    if (debug) r.debug.push_back({to_pbm(a.skeleton), a.features});
  }
  r.text = render_text(r.words);
  return r;
}

inline nlohmann::json sentence_to_json(const SentenceResult& r) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : r.words) {
    nlohmann::json chars = nlohmann::json::array();
    for (const auto& c : w) {
      chars.push_back({{"tag", std::string(1, c.tag)},
                       {"confidence", c.confidence},
                       {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}},
                       {"stroke_ids", c.stroke_ids}});
    }
    words.push_back(std::move(chars));
  }
  nlohmann::json j = {{"text", r.text}, {"words", std::move(words)}, {"warnings", r.warnings}};
  if (!r.debug.empty()) {
    nlohmann::json dbg = nlohmann::json::array();
    for (const auto& d : r.debug) {
      dbg.push_back({{"pbm", d.pbm},
                     {"features", std::vector<double>(d.features.sectors.begin(), d.features.sectors.end())}});
    }
    j["debug"] = std::move(dbg);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Levenshtein distance between two strings.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string without_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != ' ') out += c;
  return out;
}

/// Character recognition rate in percent: (N - edit distance) / N over the
/// letters of the normalized ground truth, floored at 0. Spaces never count.
inline double character_rate(const std::string& truth, const std::string& predicted) {
  const std::string t = without_spaces(normalize_text(truth));
  const std::string p = without_spaces(predicted);
  if (t.empty()) return p.empty() ? 100.0 : 0.0;
  const auto d = edit_distance(t, p);
  const double correct = d >= t.size() ? 0.0 : static_cast<double>(t.size() - d);
  return 100.0 * correct / static_cast<double>(t.size());
}

struct SentenceScore {
  std::string text;
  std::string predicted;
  double rate = 0.0;  // percent
};

struct EvalReport {
  std::vector<SentenceScore> sentences;
  double average = 0.0;  // macro average, percent

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : sentences) rows.push_back({{"text", s.text}, {"rate", s.rate}});
    return {{"sentences", std::move(rows)}, {"average", average}};
  }

  /// One "sentence → 94.8%" row per sentence, then the average.
  std::string to_table() const {
    std::string out;
    char buf[32];
    for (const auto& s : sentences) {
      std::snprintf(buf, sizeof buf, "%.1f%%", s.rate);
      out += s.text + " → " + buf + "\n";
    }
    std::snprintf(buf, sizeof buf, "%.1f%%", average);
    out += std::string("average → ") + buf + "\n";
    return out;
  }
};

inline EvalReport evaluate(const std::vector<SentenceSample>& corpus, const MlpModel& m, const SegmentationParams& p) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no sentences to evaluate");
  EvalReport report;
  double sum = 0.0;
  for (const auto& s : corpus) {
    const SentenceResult r = recognize_sentence(s.trace, m, p);
    const double rate = character_rate(s.text, r.text);
    report.sentences.push_back({s.text, r.text, rate});
    sum += rate;
  }
  report.average = sum / static_cast<double>(corpus.size());
  return report;
}

/// Fraction of glyph traces whose predicted tag matches the label.
inline double glyph_accuracy(const std::vector<LabeledTrace>& glyphs, const MlpModel& m) {
  if (glyphs.empty()) throw Error(ErrorCode::EmptyCorpus, "no glyphs to evaluate");
  std::size_t correct = 0;
  for (const auto& g : glyphs)
    if (classify(m, glyph_features(g.trace)).tag == g.tag) ++correct;
  return static_cast<double>(correct) / static_cast<double>(glyphs.size());
}

inline std::vector<LabeledFeatures> glyph_dataset(const std::vector<LabeledTrace>& glyphs) {
  std::vector<LabeledFeatures> data;
  data.reserve(glyphs.size());
  for (const auto& g : glyphs) data.push_back({glyph_features(g.trace), g.tag - 'A'});
  return data;
}

}  // namespace esr
