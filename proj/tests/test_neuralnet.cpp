#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "esr/neuralnet.hpp"
#include "oracles.hpp"

using namespace esr;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: no error
}

FeatureVector random_features(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureVector f;
  double total = 0;
  for (double& v : f.sectors) total += (v = u(gen));
  for (double& v : f.sectors) v /= total;
  return f;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "esr_nn_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Architecture, Dimensions) {
  EXPECT_EQ(kInputs, 12u);
  EXPECT_EQ(kHidden, 200u);
  EXPECT_EQ(kOutputs, 26u);
  EXPECT_EQ(kNeuronCount, 238u);
  EXPECT_EQ(kParameterCount, 200u * 12 + 200 + 26 * 200 + 26);
  EXPECT_EQ(kParameterCount, 7826u);
  EXPECT_EQ(MlpModel{}.params.size(), 7826u);
  EXPECT_EQ(MlpModel{}.labels.front(), 'A');
  EXPECT_EQ(MlpModel{}.labels.back(), 'Z');
}

TEST(TrainConfigDefaults, MatchPublishedValues) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 0.10);
  EXPECT_EQ(c.momentum, 0.10);
  EXPECT_EQ(c.max_epochs, 4000);
  EXPECT_EQ(c.target_sse, 0.01);
  EXPECT_EQ(c.target_hi, 0.9);
  EXPECT_EQ(c.target_lo, 0.1);
}

TEST(TrainConfigDefaults, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return code_of([&] { c.validate(); });
  };
  EXPECT_EQ(bad([](TrainConfig& c) { c.learning_rate = 0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& c) { c.momentum = 1.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& c) { c.momentum = -0.1; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& c) { c.max_epochs = 0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& c) { c.target_lo = 0.9; }), ErrorCode::InvalidConfig);
}

TEST(InitRandom, DeterministicAndBounded) {
  TrainConfig c;
  c.seed = 99;
  const MlpModel a = init_random(c), b = init_random(c);
  EXPECT_EQ(a, b);
  c.seed = 100;
  EXPECT_NE(init_random(c), a);
  std::size_t weights = 0;
  for (std::size_t h = 0; h < kHidden; ++h) {
    EXPECT_EQ(a.b1(h), 0.0);
    for (std::size_t i = 0; i < kInputs; ++i, ++weights) {
      EXPECT_GE(a.w1(h, i), -0.5);
      EXPECT_LE(a.w1(h, i), 0.5);
    }
  }
  for (std::size_t o = 0; o < kOutputs; ++o) {
    EXPECT_EQ(a.b2(o), 0.0);
    for (std::size_t h = 0; h < kHidden; ++h, ++weights) {
      EXPECT_GE(a.w2(o, h), -0.5);
      EXPECT_LE(a.w2(o, h), 0.5);
    }
  }
  EXPECT_EQ(weights, 7600u);
}

TEST(Hebbian, SingleUnitPattern) {
  AssociationPattern p;
  p.input[0] = 1.0;   // e1
  p.target[2] = 1.0;  // e3
  const auto w = hebbian_init(std::span<const AssociationPattern>(&p, 1));
  for (std::size_t r = 0; r < kOutputs; ++r)
    for (std::size_t c = 0; c < kInputs; ++c) EXPECT_EQ(w.at(r, c), (r == 2 && c == 0) ? 1.0 : 0.0);
}

TEST(Hebbian, OrthonormalRecallIsExact) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t count : {1u, 3u, 12u}) {
    const auto basis = oracle::orthonormal_set(count, gen);
    std::vector<AssociationPattern> pats(count);
    for (std::size_t p = 0; p < count; ++p) {
      pats[p].input = basis[p];
      for (double& t : pats[p].target) t = u(gen);
    }
    const auto w = hebbian_init(pats);
    double worst = 0;
    for (const auto& p : pats) {
      const auto y = w.recall(p.input);
      for (std::size_t r = 0; r < kOutputs; ++r) worst = std::max(worst, std::abs(y[r] - p.target[r]));
    }
    EXPECT_LT(worst, 1e-9) << count;
  }
}

TEST(Hebbian, Errors) {
  std::vector<AssociationPattern> none;
  EXPECT_EQ(code_of([&] { hebbian_init(none); }), ErrorCode::EmptyDataset);
  std::vector<AssociationPattern> zero(2);
  zero[0].input[3] = 1.0;
  EXPECT_EQ(code_of([&] { hebbian_init(zero); }), ErrorCode::ZeroInputVector);
}

TEST(Forward, ZeroModelGivesOneHalf) {
  const auto out = forward(MlpModel{}, FeatureVector{});
  EXPECT_EQ(out.size(), 26u);
  for (double v : out) EXPECT_EQ(v, 0.5);
}

TEST(Forward, HandBuiltTwoTwoOneNetwork) {
  MlpModel m;
  m.w1(0, 0) = 0.5, m.w1(0, 1) = -1.0, m.b1(0) = 0.1;
  m.w1(1, 0) = 1.5, m.w1(1, 1) = 2.0, m.b1(1) = -0.2;
  m.w2(0, 0) = 1.0, m.w2(0, 1) = -1.0, m.b2(0) = 0.3;
  FeatureVector x;
  x[0] = 1.0, x[1] = 0.5;
  const auto a = forward_full(m, x);
  // z_h0 = 0.5 - 0.5 + 0.1 = 0.1, z_h1 = 1.5 + 1.0 - 0.2 = 2.3
  EXPECT_NEAR(a.hidden[0], 0.524979187478939986, 1e-12);
  EXPECT_NEAR(a.hidden[1], 0.908877038985143865, 1e-12);
  // z_o = h0 - h1 + 0.3 = -0.0838978515062038786
  EXPECT_NEAR(a.output[0], 0.479037831476983316, 1e-12);
  for (std::size_t o = 1; o < kOutputs; ++o) EXPECT_EQ(a.output[o], 0.5);
}

TEST(Forward, OutputsStayInOpenUnitInterval) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    TrainConfig c;
    c.seed = static_cast<std::uint64_t>(trial);
    const auto m = init_random(c);
    auto x = random_features(gen);
    if (trial % 2) x[trial % 12] = 50.0;
    for (double v : forward(m, x)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(GradientCheck, ZeroNetAtHalfTargets) {
  OutputVector target;
  target.fill(0.5);
  const auto g = loss_gradient(MlpModel{}, FeatureVector{}, target);
  for (std::size_t o = 0; o < kOutputs; ++o) EXPECT_EQ(g[kB2Offset + o], 0.0);
  EXPECT_LT(gradient_check(MlpModel{}, FeatureVector{}, target, 1e-5), 1e-9);
}

TEST(GradientCheck, RandomNetsAgreeWithFiniteDifferences) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 10; ++trial) {
    TrainConfig c;
    c.seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto m = init_random(c);
    LabeledFeatures s{random_features(gen), static_cast<int>(gen() % 26)};
    EXPECT_LT(gradient_check(m, s, 1e-5), 1e-4) << trial;
  }
}

TEST(GradientCheck, DuplicatedSampleDoublesBatchGradient) {
  std::mt19937_64 gen(3);
  TrainConfig c;
  const auto m = init_random(c);
  const LabeledFeatures s{random_features(gen), 7};
  const std::vector<LabeledFeatures> one{s}, two{s, s};
  const auto g1 = batch_gradient(m, one), g2 = batch_gradient(m, two);
  for (std::size_t p = 0; p < kParameterCount; ++p) EXPECT_EQ(g2[p], 2.0 * g1[p]);
}

TEST(GradientCheck, RejectsNonPositiveEps) {
  EXPECT_EQ(code_of([] { gradient_check(MlpModel{}, LabeledFeatures{}, 0.0); }), ErrorCode::InvalidConfig);
}

TEST(TrainBackprop, SingleStepWithoutMomentumIsPlainGradientDescent) {
  std::mt19937_64 gen(21);
  TrainConfig c;
  c.momentum = 0.0;
  c.max_epochs = 1;
  c.target_sse = 0.0;
  const auto m0 = init_random(c);
  const LabeledFeatures s{random_features(gen), 4};
  ASSERT_LT(gradient_check(m0, s, 1e-5), 1e-4);
  const auto grad = loss_gradient(m0, s.features, one_hot_target(4));
  const auto r = train_backprop(m0, std::vector<LabeledFeatures>{s}, c);
  for (std::size_t p = 0; p < kParameterCount; ++p) EXPECT_EQ(r.model.params[p], m0.params[p] + -c.learning_rate * grad[p]);
  EXPECT_EQ(r.report.epochs_run, 1);
}

TEST(TrainBackprop, FourPatternToyConverges) {
  std::vector<LabeledFeatures> data;
  for (int k = 0; k < 4; ++k) {
    FeatureVector f;
    f[static_cast<std::size_t>(3 * k)] = 1.0;
    data.push_back({f, k});
  }
  TrainConfig c;  // defaults, seed 1
  const auto r = train_backprop(init_random(c), data, c);
  EXPECT_LT(r.report.final_sse, 0.01);
  EXPECT_TRUE(r.report.stopped_early);
  EXPECT_EQ(r.report.epochs_run, 652);  // pinned regression value
  EXPECT_EQ(r.report.sse_history.size(), static_cast<std::size_t>(r.report.epochs_run));
  EXPECT_EQ(r.report.sse_history.back(), r.report.final_sse);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(classify(r.model, data[k].features).index, k);
  // bitwise determinism
  const auto again = train_backprop(init_random(c), data, c);
  EXPECT_EQ(again.model, r.model);
  EXPECT_EQ(again.report.sse_history, r.report.sse_history);
}

TEST(TrainBackprop, Errors) {
  TrainConfig c;
  EXPECT_EQ(code_of([&] { train_backprop(MlpModel{}, {}, c); }), ErrorCode::EmptyDataset);
  std::vector<LabeledFeatures> bad{{FeatureVector{}, 26}};
  EXPECT_EQ(code_of([&] { train_backprop(MlpModel{}, bad, c); }), ErrorCode::SchemaViolation);

  std::mt19937_64 gen(2);
  std::vector<LabeledFeatures> data;
  for (int i = 0; i < 50; ++i) data.push_back({random_features(gen), i % 26});
  TrainConfig wild;
  wild.learning_rate = 1e308;
  wild.momentum = 0.99;
  wild.max_epochs = 3;
  EXPECT_EQ(code_of([&] { train_backprop(init_random(wild), data, wild); }), ErrorCode::DivergedToNonFinite);
}

TEST(Classify, ArgmaxTiesAndMonotoneInvariance) {
  const MlpModel m;
  OutputVector out;
  out.fill(0.1);
  out[0] = 0.9;
  EXPECT_EQ(classify_outputs(m, out).tag, 'A');
  EXPECT_EQ(classify_outputs(m, out).confidence, 0.9);
  out[0] = 0.1;
  out[5] = 0.7;
  out[9] = 0.7;
  EXPECT_EQ(classify_outputs(m, out).index, 5);
  EXPECT_EQ(classify_outputs(m, out).tag, 'F');

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    OutputVector o;
    for (double& v : o) v = u(gen);
    const int base = classify_outputs(m, o).index;
    OutputVector t1 = o, t2 = o, t3 = o;
    for (double& v : t1) v = std::log(v / (1 - v));
    for (double& v : t2) v = v * v * v + 2.0 * v;
    for (double& v : t3) v = std::exp(5.0 * v) - 7.0;
    EXPECT_EQ(classify_outputs(m, t1).index, base);
    EXPECT_EQ(classify_outputs(m, t2).index, base);
    EXPECT_EQ(classify_outputs(m, t3).index, base);
  }
}

TEST(ModelFile, RoundTripIsBitwise) {
  TrainConfig c;
  c.seed = 8;
  auto m = init_random(c);
  m.b1(3) = -0.0;
  m.b2(7) = 1e-310;  // subnormal survives
  const auto path = temp_path("round.esr");
  save_model(m, path);
  EXPECT_EQ(std::filesystem::file_size(path), 62646u);
  const auto back = load_model(path);
  EXPECT_EQ(serialize_model(back), serialize_model(m));
  EXPECT_TRUE(std::signbit(back.b1(3)));
  const auto bytes = read_file_bytes(path);
  EXPECT_EQ(bytes.substr(0, 4), "ESR1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 200);
}

TEST(ModelFile, Errors) {
  const std::string good = serialize_model(init_random(TrainConfig{}));
  auto load = [](const std::string& bytes) { return code_of([&] { deserialize_model(bytes); }); };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_EQ(load(bad), ErrorCode::BadMagic);
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(load(bad), ErrorCode::UnsupportedVersion);
  EXPECT_EQ(load(good.substr(0, 12 + 8 * 1000 + 3)), ErrorCode::TruncatedFile);
  EXPECT_EQ(load(good.substr(0, 2)), ErrorCode::TruncatedFile);
  EXPECT_EQ(load(good + "x"), ErrorCode::SchemaViolation);
  bad = good;
  const auto nan_bits = std::bit_cast<std::uint64_t>(std::numeric_limits<double>::quiet_NaN());
  for (int b = 0; b < 8; ++b) bad[12 + 8 * 5 + b] = static_cast<char>((nan_bits >> (8 * b)) & 0xff);
  EXPECT_EQ(load(bad), ErrorCode::NonFiniteWeight);

  MlpModel inf;
  inf.params[10] = INFINITY;
  EXPECT_EQ(code_of([&] { save_model(inf, temp_path("inf.esr")); }), ErrorCode::NonFiniteWeight);
  EXPECT_EQ(code_of([] { load_model("/nonexistent/dir/model.esr"); }), ErrorCode::IoError);
}
