#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "esr/error.hpp"
#include "esr/features.hpp"
#include "esr/rng.hpp"

namespace esr {

inline constexpr std::size_t kInputs = kSectorCount;  // 12
inline constexpr std::size_t kHidden = 200;
inline constexpr std::size_t kOutputs = 26;
inline constexpr std::size_t kNeuronCount = kInputs + kHidden + kOutputs;  // 238

inline constexpr std::size_t kW1Size = kHidden * kInputs;
inline constexpr std::size_t kB1Offset = kW1Size;
inline constexpr std::size_t kW2Offset = kB1Offset + kHidden;
inline constexpr std::size_t kB2Offset = kW2Offset + kOutputs * kHidden;
inline constexpr std::size_t kParameterCount = kB2Offset + kOutputs;  // 7826

using OutputVector = std::array<double, kOutputs>;

/// 12-200-26 logistic network. Parameters live in one flat vector laid out
/// as w1 (hidden x input, row-major), b1, w2 (output x hidden, row-major), b2;
/// the same order the model file uses.
struct MlpModel {
  std::vector<double> params = std::vector<double>(kParameterCount, 0.0);
  std::array<char, kOutputs> labels = default_labels();

  static constexpr std::array<char, kOutputs> default_labels() {
    std::array<char, kOutputs> l{};
    for (std::size_t k = 0; k < kOutputs; ++k) l[k] = static_cast<char>('A' + k);
    return l;
  }

  double& w1(std::size_t h, std::size_t i) { return params[h * kInputs + i]; }
  double w1(std::size_t h, std::size_t i) const { return params[h * kInputs + i]; }
  double& b1(std::size_t h) { return params[kB1Offset + h]; }
  double b1(std::size_t h) const { return params[kB1Offset + h]; }
  double& w2(std::size_t o, std::size_t h) { return params[kW2Offset + o * kHidden + h]; }
  double w2(std::size_t o, std::size_t h) const { return params[kW2Offset + o * kHidden + h]; }
  double& b2(std::size_t o) { return params[kB2Offset + o]; }
  double b2(std::size_t o) const { return params[kB2Offset + o]; }

  bool finite() const {
    return std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct TrainConfig {
  double learning_rate = 0.10;
  double momentum = 0.10;
  int max_epochs = 4000;
  double target_sse = 0.01;
  std::uint64_t seed = 1;
  double target_hi = 0.9;
  double target_lo = 0.1;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
    if (max_epochs < 1) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    if (!(target_lo < target_hi)) throw Error(ErrorCode::InvalidConfig, "target_lo must be < target_hi");
  }
};

struct TrainReport {
  int epochs_run = 0;
  double final_sse = 0.0;
  std::vector<double> sse_history;
  bool stopped_early = false;
};

struct LabeledFeatures {
  FeatureVector features;
  int label = 0;  // 0..25
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline OutputVector one_hot_target(int cls, double hi = 0.9, double lo = 0.1) {
  OutputVector t;
  t.fill(lo);
  t[static_cast<std::size_t>(cls)] = hi;
  return t;
}

/// Uniform [-0.5, 0.5] weights from the seeded generator, zero biases.
inline MlpModel init_random(const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  MlpModel m;
  for (std::size_t i = 0; i < kW1Size; ++i) m.params[i] = rng.uniform(-0.5, 0.5);
  for (std::size_t i = kW2Offset; i < kB2Offset; ++i) m.params[i] = rng.uniform(-0.5, 0.5);
  return m;
}

// ---------------------------------------------------------------------------
// Orthogonal pattern association: W = sum_p (tv_p outer iv_p) / ||iv_p||.

struct AssociationPattern {
  std::array<double, kInputs> input{};
  OutputVector target{};
};

struct AssociationMatrix {
  std::vector<double> cells = std::vector<double>(kOutputs * kInputs, 0.0);  // row = output
  double at(std::size_t row, std::size_t col) const { return cells[row * kInputs + col]; }
  double& at(std::size_t row, std::size_t col) { return cells[row * kInputs + col]; }

  OutputVector recall(const std::array<double, kInputs>& x) const {
    OutputVector y{};
    for (std::size_t r = 0; r < kOutputs; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < kInputs; ++c) s += at(r, c) * x[c];
      y[r] = s;
    }
    return y;
  }
};

/// The denominator is the plain norm ||iv||, not its square: recall is exact
/// for unit-norm (orthonormal) inputs only.
inline AssociationMatrix hebbian_init(std::span<const AssociationPattern> patterns) {
  if (patterns.empty()) throw Error(ErrorCode::EmptyDataset, "hebbian_init needs at least one pattern");
  AssociationMatrix w;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const auto& iv = patterns[p].input;
    double norm = 0.0;
    for (double v : iv) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(ErrorCode::ZeroInputVector, "pattern " + std::to_string(p) + " has a zero input");
    for (std::size_t r = 0; r < kOutputs; ++r)
      for (std::size_t c = 0; c < kInputs; ++c) w.at(r, c) += patterns[p].target[r] * iv[c] / norm;
  }
  return w;
}

// ---------------------------------------------------------------------------

struct Activations {
  std::array<double, kHidden> hidden{};
  OutputVector output{};
};

inline Activations forward_full(const MlpModel& m, const FeatureVector& x) {
  Activations a;
  const double* w1 = m.params.data();
  for (std::size_t h = 0; h < kHidden; ++h) {
    double z = m.params[kB1Offset + h];
    const double* row = w1 + h * kInputs;
    for (std::size_t i = 0; i < kInputs; ++i) z += row[i] * x[i];
    a.hidden[h] = sigmoid(z);
  }
  const double* w2 = m.params.data() + kW2Offset;
  for (std::size_t o = 0; o < kOutputs; ++o) {
    double z = m.params[kB2Offset + o];
    const double* row = w2 + o * kHidden;
    for (std::size_t h = 0; h < kHidden; ++h) z += row[h] * a.hidden[h];
    a.output[o] = sigmoid(z);
  }
  return a;
}

inline OutputVector forward(const MlpModel& m, const FeatureVector& x) { return forward_full(m, x).output; }

/// Gradient of 0.5 * sum (o - t)^2 with respect to every parameter, in the
/// model's flat layout. Returns the loss.
inline double loss_gradient(const MlpModel& m, const FeatureVector& x, const OutputVector& target,
                            std::span<double> grad) {
  const Activations a = forward_full(m, x);
  OutputVector delta_out{};
  double loss = 0.0;
  for (std::size_t o = 0; o < kOutputs; ++o) {
    const double err = a.output[o] - target[o];  // dE/do
    loss += 0.5 * err * err;
    delta_out[o] = err * a.output[o] * (1.0 - a.output[o]);  // dE/dz
    grad[kB2Offset + o] = delta_out[o];
    double* gw2 = grad.data() + kW2Offset + o * kHidden;
    for (std::size_t h = 0; h < kHidden; ++h) gw2[h] = delta_out[o] * a.hidden[h];
  }
  for (std::size_t h = 0; h < kHidden; ++h) {
    double back = 0.0;
    for (std::size_t o = 0; o < kOutputs; ++o) back += m.w2(o, h) * delta_out[o];
    const double delta_hidden = back * a.hidden[h] * (1.0 - a.hidden[h]);
    grad[kB1Offset + h] = delta_hidden;
    double* gw1 = grad.data() + h * kInputs;
    for (std::size_t i = 0; i < kInputs; ++i) gw1[i] = delta_hidden * x[i];
  }
  return loss;
}

inline std::vector<double> loss_gradient(const MlpModel& m, const FeatureVector& x, const OutputVector& target) {
  std::vector<double> g(kParameterCount, 0.0);
  loss_gradient(m, x, target, g);
  return g;
}

/// Summed gradient over a batch with one-hot targets.
inline std::vector<double> batch_gradient(const MlpModel& m, std::span<const LabeledFeatures> batch,
                                          double hi = 0.9, double lo = 0.1) {
  std::vector<double> total(kParameterCount, 0.0);
  std::vector<double> g(kParameterCount, 0.0);
  for (const auto& s : batch) {
    loss_gradient(m, s.features, one_hot_target(s.label, hi, lo), g);
    for (std::size_t i = 0; i < kParameterCount; ++i) total[i] += g[i];
  }
  return total;
}

/// Compares backprop gradients with central differences of the loss over every
/// parameter and returns the largest |a - n| / max(|a|, |n|, 1e-8). The numeric
/// side runs in extended precision and only re-evaluates the units a
/// parameter feeds.
inline double gradient_check(const MlpModel& m, const FeatureVector& x, const OutputVector& target, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps must be > 0");
  using ld = long double;
  const std::vector<double> analytic = loss_gradient(m, x, target);

  std::array<ld, kHidden> z1{}, h1{};
  for (std::size_t h = 0; h < kHidden; ++h) {
    ld z = m.b1(h);
    for (std::size_t i = 0; i < kInputs; ++i) z += static_cast<ld>(m.w1(h, i)) * x[i];
    z1[h] = z;
    h1[h] = 1.0L / (1.0L + std::exp(-z));
  }
  std::array<ld, kOutputs> z2{};
  for (std::size_t o = 0; o < kOutputs; ++o) {
    ld z = m.b2(o);
    for (std::size_t h = 0; h < kHidden; ++h) z += static_cast<ld>(m.w2(o, h)) * h1[h];
    z2[o] = z;
  }
  auto sig = [](ld z) { return 1.0L / (1.0L + std::exp(-z)); };
  auto term = [&](std::size_t o, ld z) {
    const ld e = sig(z) - static_cast<ld>(target[o]);
    return 0.5L * e * e;
  };
  // loss with hidden unit h's pre-activation replaced by z
  auto loss_hidden = [&](std::size_t h, ld z) {
    const ld dh = sig(z) - h1[h];
    ld total = 0.0L;
    for (std::size_t o = 0; o < kOutputs; ++o) total += term(o, z2[o] + static_cast<ld>(m.w2(o, h)) * dh);
    return total;
  };
  ld base_terms[kOutputs];
  ld base = 0.0L;
  for (std::size_t o = 0; o < kOutputs; ++o) {
    base_terms[o] = term(o, z2[o]);
    base += base_terms[o];
  }
  // loss with output unit o's pre-activation replaced by z
  auto loss_output = [&](std::size_t o, ld z) { return base - base_terms[o] + term(o, z); };

  const ld step = eps;
  double worst = 0.0;
  auto record = [&](std::size_t idx, ld plus, ld minus) {
    const double numeric = static_cast<double>((plus - minus) / (2.0L * step));
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  for (std::size_t h = 0; h < kHidden; ++h) {
    for (std::size_t i = 0; i < kInputs; ++i) {
      const ld d = step * static_cast<ld>(x[i]);
      record(h * kInputs + i, loss_hidden(h, z1[h] + d), loss_hidden(h, z1[h] - d));
    }
    record(kB1Offset + h, loss_hidden(h, z1[h] + step), loss_hidden(h, z1[h] - step));
  }
  for (std::size_t o = 0; o < kOutputs; ++o) {
    for (std::size_t h = 0; h < kHidden; ++h) {
      const ld d = step * h1[h];
      record(kW2Offset + o * kHidden + h, loss_output(o, z2[o] + d), loss_output(o, z2[o] - d));
    }
    record(kB2Offset + o, loss_output(o, z2[o] + step), loss_output(o, z2[o] - step));
  }
  return worst;
}

inline double gradient_check(const MlpModel& m, const LabeledFeatures& sample, double eps,
                             double hi = 0.9, double lo = 0.1) {
  return gradient_check(m, sample.features, one_hot_target(sample.label, hi, lo), eps);
}

// ---------------------------------------------------------------------------

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

/// Online backpropagation with momentum. Each epoch visits the data in a
/// fresh order drawn from the seeded generator; the update is
/// delta = -lr * grad + momentum * previous_delta. Epoch SSE is summed from
/// the outputs seen before each update.
inline TrainResult train_backprop(MlpModel m, std::span<const LabeledFeatures> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  for (const auto& s : data) {
    if (s.label < 0 || s.label >= static_cast<int>(kOutputs))
      throw Error(ErrorCode::SchemaViolation, "label outside 0..25");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad(kParameterCount, 0.0);
  std::vector<double> velocity(kParameterCount, 0.0);

  TrainReport report;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double sse = 0.0;
    for (std::size_t idx : order) {
      const auto& s = data[idx];
      sse += 2.0 * loss_gradient(m, s.features, one_hot_target(s.label, cfg.target_hi, cfg.target_lo), grad);
      for (std::size_t p = 0; p < kParameterCount; ++p) {
        velocity[p] = -cfg.learning_rate * grad[p] + cfg.momentum * velocity[p];
        m.params[p] += velocity[p];
      }
    }
    if (!m.finite() || !std::isfinite(sse)) {
      throw Error(ErrorCode::DivergedToNonFinite, "weights became non-finite in epoch " + std::to_string(epoch + 1));
    }
    report.sse_history.push_back(sse);
    report.epochs_run = epoch + 1;
    report.final_sse = sse;
    if (sse <= cfg.target_sse) {
      report.stopped_early = report.epochs_run < cfg.max_epochs;
      break;
    }
  }
  return {std::move(m), std::move(report)};
}

struct Classification {
  char tag = 'A';
  int index = 0;
  double confidence = 0.0;
};

/// Argmax of the outputs (ties go to the lower index); confidence is the
/// winning activation.
inline Classification classify_outputs(const MlpModel& m, const OutputVector& out) {
  std::size_t best = 0;
  for (std::size_t o = 1; o < kOutputs; ++o)
    if (out[o] > out[best]) best = o;
  return {m.labels[best], static_cast<int>(best), out[best]};
}

inline Classification classify(const MlpModel& m, const FeatureVector& x) {
  return classify_outputs(m, forward(m, x));
}

// ---------------------------------------------------------------------------
// Model file: "ESR1", u16 version, u16 x3 dims, f64 params (LE), 26 label bytes.

inline constexpr std::uint16_t kModelVersion = 1;
inline constexpr std::size_t kModelHeaderSize = 4 + 2 + 3 * 2;
inline constexpr std::size_t kModelFileSize = kModelHeaderSize + kParameterCount * 8 + kOutputs;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>(v >> 8);
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xff);
}

inline std::uint16_t get_u16(const std::string& in, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(in[at]) |
                                    (static_cast<unsigned char>(in[at + 1]) << 8));
}

inline double get_f64(const std::string& in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t{static_cast<unsigned char>(in[at + b])} << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string serialize_model(const MlpModel& m) {
  std::string out;
  out.reserve(kModelFileSize);
  out += "ESR1";
  detail::put_u16(out, kModelVersion);
  detail::put_u16(out, static_cast<std::uint16_t>(kInputs));
  detail::put_u16(out, static_cast<std::uint16_t>(kHidden));
  detail::put_u16(out, static_cast<std::uint16_t>(kOutputs));
  for (double v : m.params) detail::put_f64(out, v);
  out.append(m.labels.begin(), m.labels.end());
  return out;
}

inline MlpModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "model file shorter than its magic");
  if (bytes.compare(0, 4, "ESR1") != 0) throw Error(ErrorCode::BadMagic, "model file does not start with ESR1");
  if (bytes.size() < kModelHeaderSize) throw Error(ErrorCode::TruncatedFile, "model header is incomplete");
  if (detail::get_u16(bytes, 4) != kModelVersion)
    throw Error(ErrorCode::UnsupportedVersion, "model version " + std::to_string(detail::get_u16(bytes, 4)));
  if (detail::get_u16(bytes, 6) != kInputs || detail::get_u16(bytes, 8) != kHidden ||
      detail::get_u16(bytes, 10) != kOutputs) {
    throw Error(ErrorCode::UnsupportedVersion, "model dimensions are not 12/200/26");
  }
  if (bytes.size() < kModelFileSize) throw Error(ErrorCode::TruncatedFile, "model file ends early");
  if (bytes.size() > kModelFileSize) throw Error(ErrorCode::SchemaViolation, "trailing bytes after model data");

  MlpModel m;
  for (std::size_t p = 0; p < kParameterCount; ++p) {
    const double v = detail::get_f64(bytes, kModelHeaderSize + 8 * p);
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteWeight, "parameter " + std::to_string(p));
    m.params[p] = v;
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(kModelHeaderSize + 8 * kParameterCount), kOutputs,
              m.labels.begin());
  return m;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

inline void save_model(const MlpModel& m, const std::filesystem::path& path) {
  if (!m.finite()) throw Error(ErrorCode::NonFiniteWeight, "refusing to save a non-finite model");
  write_file_bytes(path, serialize_model(m));
}

inline MlpModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path)); }

}  // namespace esr
