#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "esr/error.hpp"
#include "esr/neuralnet.hpp"
#include "esr/rng.hpp"
#include "esr/stroke_model.hpp"
#include "json.hpp"

namespace esr {

struct UnitPoint {
  double x = 0.0;
  double y = 0.0;
};

using Polyline = std::vector<UnitPoint>;

// Stroke skeleton of one uppercase letter in the unit square (y down).
struct GlyphTemplate {
  char tag = 'A';
  std::vector<Polyline> strokes;
};

namespace detail {

// Elliptical arc from a0 to a1 degrees (y down, so increasing angles turn
// clockwise on screen). Endpoints included.
inline Polyline arc(double cx, double cy, double rx, double ry, double a0, double a1, int segments = 16) {
  Polyline p;
  for (int i = 0; i <= segments; ++i) {
    const double a = (a0 + (a1 - a0) * i / segments) * std::numbers::pi / 180.0;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

inline Polyline join(std::initializer_list<Polyline> parts) {
  Polyline out;
  for (const auto& part : parts) {
    for (const auto& q : part) {
      if (!out.empty() && std::abs(out.back().x - q.x) < 1e-12 && std::abs(out.back().y - q.y) < 1e-12) continue;
      out.push_back(q);
    }
  }
  return out;
}

inline std::vector<GlyphTemplate> build_templates() {
  using P = Polyline;
  std::vector<GlyphTemplate> t;
  t.push_back({'A', {P{{0.15, 0.9}, {0.5, 0.1}, {0.85, 0.9}}, P{{0.3, 0.58}, {0.7, 0.58}}}});
  t.push_back({'B',
               {P{{0.2, 0.9}, {0.2, 0.1}},
                join({P{{0.2, 0.1}, {0.5, 0.1}}, arc(0.5, 0.3, 0.22, 0.2, -90, 90), P{{0.5, 0.5}, {0.2, 0.5}},
                      P{{0.2, 0.5}, {0.55, 0.5}}, arc(0.55, 0.7, 0.25, 0.2, -90, 90), P{{0.55, 0.9}, {0.2, 0.9}}})}});
  t.push_back({'C', {arc(0.5, 0.5, 0.35, 0.4, -45, -315, 24)}});
  t.push_back({'D', {P{{0.2, 0.1}, {0.2, 0.9}},
                     join({P{{0.2, 0.1}, {0.4, 0.1}}, arc(0.4, 0.5, 0.4, 0.4, -90, 90, 20), P{{0.4, 0.9}, {0.2, 0.9}}})}});
  t.push_back({'E', {P{{0.8, 0.1}, {0.25, 0.1}, {0.25, 0.9}, {0.8, 0.9}}, P{{0.25, 0.5}, {0.7, 0.5}}}});
  t.push_back({'F', {P{{0.8, 0.1}, {0.25, 0.1}, {0.25, 0.9}}, P{{0.25, 0.5}, {0.7, 0.5}}}});
  t.push_back({'G', {join({arc(0.5, 0.5, 0.35, 0.4, -40, -320, 24), P{{0.8, 0.55}, {0.55, 0.55}}})}});
  t.push_back({'H', {P{{0.2, 0.1}, {0.2, 0.9}}, P{{0.8, 0.1}, {0.8, 0.9}}, P{{0.2, 0.5}, {0.8, 0.5}}}});
  t.push_back({'I', {P{{0.5, 0.1}, {0.5, 0.9}}, P{{0.3, 0.1}, {0.7, 0.1}}, P{{0.3, 0.9}, {0.7, 0.9}}}});
  t.push_back({'J', {P{{0.35, 0.1}, {0.85, 0.1}}, join({P{{0.65, 0.1}, {0.65, 0.7}}, arc(0.45, 0.7, 0.2, 0.2, 0, 180, 12)})}});
  t.push_back({'K', {P{{0.2, 0.1}, {0.2, 0.9}}, P{{0.8, 0.1}, {0.2, 0.55}, {0.8, 0.9}}}});
  t.push_back({'L', {P{{0.25, 0.1}, {0.25, 0.9}, {0.8, 0.9}}}});
  t.push_back({'M', {P{{0.15, 0.9}, {0.15, 0.1}, {0.5, 0.6}, {0.85, 0.1}, {0.85, 0.9}}}});
  t.push_back({'N', {P{{0.2, 0.9}, {0.2, 0.1}, {0.8, 0.9}, {0.8, 0.1}}}});
  t.push_back({'O', {arc(0.5, 0.5, 0.35, 0.4, 0, 360, 32)}});
  t.push_back({'P', {join({P{{0.2, 0.9}, {0.2, 0.1}, {0.55, 0.1}}, arc(0.55, 0.3, 0.25, 0.2, -90, 90), P{{0.55, 0.5}, {0.2, 0.5}}})}});
  t.push_back({'Q', {arc(0.5, 0.5, 0.35, 0.4, 0, 360, 32), P{{0.55, 0.65}, {0.9, 0.95}}}});
  t.push_back({'R', {join({P{{0.2, 0.9}, {0.2, 0.1}, {0.55, 0.1}}, arc(0.55, 0.3, 0.25, 0.2, -90, 90), P{{0.55, 0.5}, {0.2, 0.5}}}),
                     P{{0.45, 0.5}, {0.8, 0.9}}}});
  t.push_back({'S', {join({arc(0.5, 0.3, 0.3, 0.2, -20, -270, 14), arc(0.5, 0.7, 0.3, 0.2, -90, 160, 14)})}});
  t.push_back({'T', {P{{0.15, 0.1}, {0.85, 0.1}}, P{{0.5, 0.1}, {0.5, 0.9}}}});
  t.push_back({'U', {join({P{{0.2, 0.1}, {0.2, 0.6}}, arc(0.5, 0.6, 0.3, 0.3, 180, 0, 16), P{{0.8, 0.6}, {0.8, 0.1}}})}});
  t.push_back({'V', {P{{0.15, 0.1}, {0.5, 0.9}, {0.85, 0.1}}}});
  t.push_back({'W', {P{{0.1, 0.1}, {0.3, 0.9}, {0.5, 0.4}, {0.7, 0.9}, {0.9, 0.1}}}});
  t.push_back({'X', {P{{0.2, 0.1}, {0.8, 0.9}}, P{{0.8, 0.1}, {0.2, 0.9}}}});
  t.push_back({'Y', {P{{0.15, 0.1}, {0.5, 0.5}, {0.85, 0.1}}, P{{0.5, 0.5}, {0.5, 0.9}}}});
  t.push_back({'Z', {P{{0.2, 0.1}, {0.8, 0.1}, {0.2, 0.9}, {0.8, 0.9}}}});
  for (auto& g : t)
    for (auto& s : g.strokes)
      for (auto& p : s) {
        p.x = std::clamp(p.x, 0.0, 1.0);
        p.y = std::clamp(p.y, 0.0, 1.0);
      }
  return t;
}

}  // namespace detail

/// The 26 built-in letter templates, 'A'..'Z' in order.
inline const std::vector<GlyphTemplate>& glyph_templates() {
  static const std::vector<GlyphTemplate> templates = detail::build_templates();
  return templates;
}

inline const GlyphTemplate& glyph_template(char tag) {
  if (tag < 'A' || tag > 'Z') throw Error(ErrorCode::UnsupportedCharacter, std::string("no template for '") + tag + "'");
  return glyph_templates()[static_cast<std::size_t>(tag - 'A')];
}

struct GeneratorConfig {
  int samples_per_class = 50;
  double jitter_rotation = 8.0;  // degrees, +/-
  double jitter_scale = 0.10;    // fraction, +/-
  double jitter_noise = 0.03;    // fraction of glyph size, +/- per point
  std::uint64_t seed = 42;

  void validate() const {
    if (samples_per_class < 1) throw Error(ErrorCode::InvalidConfig, "samples_per_class must be >= 1");
    if (!(jitter_rotation >= 0.0) || !(jitter_scale >= 0.0) || !(jitter_noise >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "jitter amounts must be >= 0");
  }

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct LabeledTrace {
  StrokeTrace trace;
  char tag = 'A';
  friend bool operator==(const LabeledTrace&, const LabeledTrace&) = default;
};

struct SentenceSample {
  StrokeTrace trace;
  std::string text;
  friend bool operator==(const SentenceSample&, const SentenceSample&) = default;
};

struct Corpus {
  std::vector<LabeledTrace> glyphs;
  std::vector<SentenceSample> sentences;
  GeneratorConfig config;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Layout constants, canvas pixels.
inline constexpr double kGlyphSize = 100.0;
inline constexpr double kGlyphMargin = 50.0;
inline constexpr int kGlyphCanvas = 200;
inline constexpr double kIntraWordGap = 0.4;  // x glyph size
inline constexpr double kInterWordGap = 1.4;  // x glyph size
inline constexpr std::int64_t kPointInterval = 8;    // ms between points
inline constexpr std::int64_t kStrokeInterval = 120;  // ms between strokes

/// The five sentences of the reference recognition protocol.
inline const std::array<std::string, 5>& protocol_sentences() {
  static const std::array<std::string, 5> s = {
      "India is a big country",
      "Where heritage can be a great unifier as well as divider",
      "Sport which were traditionally considered a hobby",
      "At the school level, sport and fitness are being taken seriously",
      "Sports as a field of study is underdeveloped in India",
  };
  return s;
}

/// Uppercases letters, drops ASCII punctuation, collapses whitespace. Any
/// other character (digits, non-ASCII) is unsupported.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
    } else if (c < 0x80 && std::isalpha(c)) {
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::toupper(c));
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else {
      throw Error(ErrorCode::UnsupportedCharacter, std::string("cannot render character '") + ch + "'");
    }
  }
  return out;
}

namespace detail {

struct Jitter {
  double rotation_deg = 0.0;
  double scale = 1.0;
};

// Template strokes in pixels relative to the glyph frame origin: rotated and
// scaled about the glyph center, then per-point noise.
inline std::vector<std::vector<UnitPoint>> jittered_glyph(const GlyphTemplate& g, const GeneratorConfig& cfg, Rng& rng) {
  Jitter j;
  j.rotation_deg = rng.uniform(-cfg.jitter_rotation, cfg.jitter_rotation);
  j.scale = 1.0 + rng.uniform(-cfg.jitter_scale, cfg.jitter_scale);
  const double a = j.rotation_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double noise = cfg.jitter_noise * kGlyphSize;
  std::vector<std::vector<UnitPoint>> out;
  for (const auto& stroke : g.strokes) {
    std::vector<UnitPoint> pts;
    for (const auto& p : stroke) {
      double x = p.x, y = p.y;
      if (cfg.jitter_rotation != 0.0 || cfg.jitter_scale != 0.0) {
        const double ux = (p.x - 0.5) * j.scale, uy = (p.y - 0.5) * j.scale;
        x = 0.5 + ca * ux - sa * uy;
        y = 0.5 + sa * ux + ca * uy;
      }
      const double nx = rng.uniform(-noise, noise);
      const double ny = rng.uniform(-noise, noise);
      pts.push_back({x * kGlyphSize + nx, y * kGlyphSize + ny});
    }
    out.push_back(std::move(pts));
  }
  return out;
}

inline void append_strokes(StrokeTrace& trace, const std::vector<std::vector<UnitPoint>>& strokes, double dx, double dy,
                           std::int64_t& clock) {
  for (const auto& s : strokes) {
    Stroke stroke;
    for (const auto& p : s) {
      stroke.points.push_back({round_millis(p.x + dx), round_millis(p.y + dy), clock});
      clock += kPointInterval;
    }
    clock += kStrokeInterval - kPointInterval;
    trace.strokes.push_back(std::move(stroke));
  }
}

inline StrokeTrace glyph_trace(const std::vector<std::vector<UnitPoint>>& strokes) {
  StrokeTrace t;
  t.canvas_width = kGlyphCanvas;
  t.canvas_height = kGlyphCanvas;
  std::int64_t clock = 0;
  append_strokes(t, strokes, kGlyphMargin, kGlyphMargin, clock);
  return t;
}

}  // namespace detail

/// A template drawn without jitter in the standard glyph frame.
inline StrokeTrace render_template(char tag) {
  GeneratorConfig still;
  still.jitter_rotation = still.jitter_scale = still.jitter_noise = 0.0;
  Rng rng(0);
  return detail::glyph_trace(detail::jittered_glyph(glyph_template(tag), still, rng));
}

/// samples_per_class jittered traces per letter, class-major order.
inline Corpus generate_glyphs(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Corpus c;
  c.config = cfg;
  c.glyphs.reserve(glyph_templates().size() * static_cast<std::size_t>(cfg.samples_per_class));
  for (const auto& g : glyph_templates()) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      c.glyphs.push_back({detail::glyph_trace(detail::jittered_glyph(g, cfg, rng)), g.tag});
    }
  }
  return c;
}

/// Lays jittered glyphs out left to right. Whitespace between neighboring
/// glyph boxes is 0.4 glyph sizes inside a word and 1.4 between words.
inline StrokeTrace generate_sentence(std::string_view text, const GeneratorConfig& cfg) {
  cfg.validate();
  const std::string norm = normalize_text(text);
  if (norm.empty()) throw Error(ErrorCode::UnsupportedCharacter, "sentence has no letters");
  Rng rng(cfg.seed);
  StrokeTrace t;
  std::int64_t clock = 0;
  double cursor = kGlyphMargin;
  double max_y = 0.0;
  bool first = true;
  bool word_break = false;
  for (char ch : norm) {
    if (ch == ' ') {
      word_break = true;
      continue;
    }
    auto strokes = detail::jittered_glyph(glyph_template(ch), cfg, rng);
    double min_x = 1e300, max_x = -1e300;
    for (const auto& s : strokes)
      for (const auto& p : s) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
      }
    if (!first) cursor += (word_break ? kInterWordGap : kIntraWordGap) * kGlyphSize;
    detail::append_strokes(t, strokes, cursor - min_x, kGlyphMargin, clock);
    cursor += max_x - min_x;
    first = false;
    word_break = false;
  }
  t.canvas_width = static_cast<int>(std::ceil(cursor + kGlyphMargin));
  t.canvas_height = std::max(kGlyphCanvas, static_cast<int>(std::ceil(max_y + 2 * kGlyphMargin)));
  return t;
}

// ---------------------------------------------------------------------------
// Persistence: manifest.json, glyphs/<tag>_<index>.json, sentences/<index>.json

inline nlohmann::json config_to_json(const GeneratorConfig& c) {
  return {{"samples_per_class", c.samples_per_class},
          {"jitter_rotation", c.jitter_rotation},
          {"jitter_scale", c.jitter_scale},
          {"jitter_noise", c.jitter_noise},
          {"seed", c.seed}};
}

inline GeneratorConfig config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.samples_per_class = j.at("samples_per_class").get<int>();
  c.jitter_rotation = j.at("jitter_rotation").get<double>();
  c.jitter_scale = j.at("jitter_scale").get<double>();
  c.jitter_noise = j.at("jitter_noise").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline void save_corpus(const Corpus& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "glyphs");
  fs::create_directories(dir / "sentences");
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
    out << text << '\n';
  };

  nlohmann::json manifest;
  manifest["config"] = config_to_json(c.config);
  manifest["seed"] = c.config.seed;
  manifest["glyphs"] = nlohmann::json::array();
  manifest["sentences"] = nlohmann::json::array();
  std::map<char, int> per_tag;
  for (const auto& g : c.glyphs) {
    const std::string rel = "glyphs/" + std::string(1, g.tag) + "_" + std::to_string(per_tag[g.tag]++) + ".json";
    write(dir / rel, trace_to_json(g.trace).dump());
    manifest["glyphs"].push_back({{"file", rel}, {"tag", std::string(1, g.tag)}});
  }
  for (std::size_t i = 0; i < c.sentences.size(); ++i) {
    const std::string rel = "sentences/" + std::to_string(i) + ".json";
    write(dir / rel, trace_to_json(c.sentences[i].trace).dump());
    manifest["sentences"].push_back({{"file", rel}, {"text", c.sentences[i].text}});
  }
  write(dir / "manifest.json", manifest.dump(2));
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) throw Error(ErrorCode::MissingManifest, "no manifest.json in " + dir.string());

  auto read_json = [](const fs::path& p, ErrorCode code) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(code, p.string() + ": cannot open");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(code, p.string() + ": not valid JSON");
    return j;
  };
  auto read_trace = [&](const std::string& rel) {
    const fs::path p = dir / rel;
    try {
      StrokeTrace t = trace_from_json(read_json(p, ErrorCode::CorruptTrace));
      validate_trace(t);
      return t;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CorruptTrace) throw;
      throw Error(ErrorCode::CorruptTrace, p.string() + ": " + e.what());
    }
  };

  const nlohmann::json manifest = read_json(manifest_path, ErrorCode::MissingManifest);
  Corpus c;
  try {
    c.config = config_from_json(manifest.at("config"));
    for (const auto& e : manifest.at("glyphs")) {
      const auto tag = e.at("tag").get<std::string>();
      if (tag.size() != 1 || tag[0] < 'A' || tag[0] > 'Z')
        throw Error(ErrorCode::SchemaViolation, "glyph tag must be a single letter A..Z");
      c.glyphs.push_back({read_trace(e.at("file").get<std::string>()), tag[0]});
    }
    for (const auto& e : manifest.at("sentences")) {
      auto text = e.at("text").get<std::string>();
      if (text.empty()) throw Error(ErrorCode::SchemaViolation, "sentence text is empty");
      c.sentences.push_back({read_trace(e.at("file").get<std::string>()), std::move(text)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("manifest: ") + e.what());
  }
  return c;
}

/// Seeded split, stratified by glyph class; each class contributes
/// round(train_fraction * count) items to the training half. Sentences are
/// split by the same fraction. Items keep their corpus order within a half.
inline std::pair<Corpus, Corpus> split(const Corpus& c, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "train_fraction must be in (0, 1)");
  Rng rng(seed);
  std::map<char, std::vector<std::size_t>> by_tag;
  for (std::size_t i = 0; i < c.glyphs.size(); ++i) by_tag[c.glyphs[i].tag].push_back(i);

  std::vector<bool> glyph_train(c.glyphs.size(), false);
  for (auto& [tag, idx] : by_tag) {
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_train && k < idx.size(); ++k) glyph_train[idx[k]] = true;
  }
  std::vector<std::size_t> sidx(c.sentences.size());
  for (std::size_t i = 0; i < sidx.size(); ++i) sidx[i] = i;
  rng.shuffle(sidx);
  std::vector<bool> sentence_train(c.sentences.size(), false);
  const auto s_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(sidx.size())));
  for (std::size_t k = 0; k < s_train; ++k) sentence_train[sidx[k]] = true;

  Corpus train, held;
  train.config = held.config = c.config;
  for (std::size_t i = 0; i < c.glyphs.size(); ++i) (glyph_train[i] ? train : held).glyphs.push_back(c.glyphs[i]);
  for (std::size_t i = 0; i < c.sentences.size(); ++i)
    (sentence_train[i] ? train : held).sentences.push_back(c.sentences[i]);
  return {std::move(train), std::move(held)};
}

}  // namespace esr
