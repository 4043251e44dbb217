// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <thread>

#include "esr/cli.hpp"
#include "esr/corpus.hpp"
#include "esr/service.hpp"
#include "oracles.hpp"

using namespace esr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

GeneratorConfig still() {
  GeneratorConfig c;
  c.jitter_rotation = c.jitter_scale = c.jitter_noise = 0.0;
  return c;
}

int run(const std::string& cmd, const fs::path& log) {
  const int s = std::system((cmd + " >" + log.string() + " 2>&1").c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  return files;
}

BinaryImage random_blob(std::mt19937_64& gen, int size) {
  BinaryImage img(size, size);
  std::uniform_real_distribution<double> pos(5.0, size - 5.0), rad(1.0, 6.0);
  const int shapes = 1 + static_cast<int>(gen() % 5);
  for (int s = 0; s < shapes; ++s) {
    const double ax = pos(gen), ay = pos(gen), r = rad(gen);
    const bool segment = gen() % 2;
    const double bx = segment ? pos(gen) : ax, by = segment ? pos(gen) : ay;
    const double vx = bx - ax, vy = by - ay, len2 = vx * vx + vy * vy;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = len2 > 0 ? std::clamp(((x - ax) * vx + (y - ay) * vy) / len2, 0.0, 1.0) : 0.0;
        const double dx = x - (ax + u * vx), dy = y - (ay + u * vy);
        if (dx * dx + dy * dy <= r * r) img.set(x, y);
      }
  }
  return img;
}

bool subset(const BinaryImage& a, const BinaryImage& b) {
  for (const Pixel& p : a.foreground())
    if (!b.at(p.x, p.y)) return false;
  return true;
}

void architecture() {
  const MlpModel m;
  const bool ok = kInputs == 12 && kHidden == 200 && kOutputs == 26 && kNeuronCount == 238 &&
                  m.params.size() == kParameterCount;
  RecognitionService svc;
  svc.replace_model(m, "");
  const auto info = nlohmann::json::parse(svc.handle_model_info().body);
  const bool served = info["dims"]["input"] == 12 && info["dims"]["hidden"] == 200 && info["dims"]["output"] == 26 &&
                      info["neurons"] == 238;
  report(ok && served, "architecture", "dims " + std::to_string(kInputs) + "/" + std::to_string(kHidden) + "/" +
                                           std::to_string(kOutputs) + ", neurons " + std::to_string(kNeuronCount));
}

void hyperparameters() {
  const TrainConfig c;
  const bool ok = c.learning_rate == 0.10 && c.momentum == 0.10 && c.max_epochs == 4000;
  report(ok, "default hyperparameters",
         "lr " + fmt("%.2f", c.learning_rate) + ", momentum " + fmt("%.2f", c.momentum) + ", max epochs " +
             std::to_string(c.max_epochs));
}

void gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    TrainConfig cfg;
    cfg.seed = gen();
    const MlpModel m = init_random(cfg);
    LabeledFeatures s;
    double total = 0.0;
    for (double& v : s.features.sectors) total += (v = u(gen));
    for (double& v : s.features.sectors) v /= total;
    s.label = static_cast<int>(gen() % kOutputs);
    worst = std::max(worst, gradient_check(m, s, 1e-5));
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-4 && secs < 30.0, "gradient check",
         "100 models, max rel error " + fmt("%.2e", worst) + " (< 1e-4), " + fmt("%.1f", secs) + " s (< 30 s)");
}

void thinning() {
  std::mt19937_64 gen(99);
  int bad = 0, total = 0;
  auto check = [&](const BinaryImage& in) {
    const auto sk = thin(in);
    const bool ok = subset(sk, in) && oracle::components_by_relabel(sk) == oracle::components_by_relabel(in) &&
                    thin(sk) == sk && !has_solid_2x2(sk);
    bad += !ok;
    ++total;
  };
  for (int i = 0; i < 500; ++i) check(random_blob(gen, 64));
  for (const auto& g : glyph_templates()) check(normalize(character_image(render_template(g.tag).strokes)));
  report(bad == 0, "thinning properties",
         std::to_string(total - bad) + "/" + std::to_string(total) +
             " images keep subset, components, idempotence, no 2x2 block");
}

void features(const Corpus& corpus) {
  // simplex on every nonempty glyph
  int bad = 0, glyphs = 0;
  auto simplex = [&](const FeatureVector& f) {
    double sum = 0.0;
    bool ok = f.sectors.size() == 12;
    for (double v : f.sectors) {
      ok = ok && v >= 0.0;
      sum += v;
    }
    bad += !(ok && std::abs(sum - 1.0) <= 1e-9);
    ++glyphs;
  };
  for (const auto& g : corpus.glyphs) simplex(glyph_features(g.trace));
  std::mt19937_64 gen(17);
  for (int i = 0; i < 500; ++i) simplex(extract_features(thin(random_blob(gen, 64))));

  // rotation-closed point sets: four-fold copies about a lattice centre
  int rot_bad = 0;
  const int c = 40;
  for (int trial = 0; trial < 500; ++trial) {
    BinaryImage img(81, 81);
    const int n = 1 + static_cast<int>(gen() % 30);
    for (int i = 0; i < n; ++i) {
      int dx = static_cast<int>(gen() % 61) - 30, dy = static_cast<int>(gen() % 61) - 30;
      if (dx == 0 && dy == 0) dx = 1;
      for (int turn = 0; turn < 4; ++turn) {
        img.set(c + dx, c + dy);
        const int t = dx;
        dx = -dy;
        dy = t;
      }
    }
    const auto f = extract_features(img);
    BinaryImage rotated(81, 81);
    for (const Pixel& p : img.foreground()) rotated.set(c - (p.y - c), c + (p.x - c));
    const auto g = extract_features(rotated);
    for (std::size_t k = 0; k < 12; ++k) {
      if (f[(k + 3) % 12] != f[k]) ++rot_bad;
      if (g[(k + 3) % 12] != f[k]) ++rot_bad;
    }
  }
  report(bad == 0 && rot_bad == 0, "feature invariants",
         std::to_string(glyphs - bad) + "/" + std::to_string(glyphs) + " on simplex (1e-9); rotation shift-by-3 " +
             (rot_bad == 0 ? "exact on 500 closed sets" : std::to_string(rot_bad) + " mismatches"));
}

void hebbian() {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t count = 1 + gen() % kInputs;
    const auto basis = oracle::orthonormal_set(count, gen);
    std::vector<AssociationPattern> pats(count);
    for (std::size_t p = 0; p < count; ++p) {
      pats[p].input = basis[p];
      for (double& v : pats[p].target) v = u(gen);
    }
    const auto w = hebbian_init(pats);
    for (const auto& p : pats) {
      const auto y = w.recall(p.input);
      for (std::size_t r = 0; r < kOutputs; ++r) worst = std::max(worst, std::abs(y[r] - p.target[r]));
    }
  }
  report(worst < 1e-9, "hebbian recall", "max error " + fmt("%.2e", worst) + " on 50 orthonormal sets (< 1e-9)");
}

struct ProtocolRun {
  fs::path corpus, model, json;
  bool ok = false;
  double seconds = 0.0;
};

ProtocolRun protocol_run(const fs::path& root, const std::string& tag) {
  const std::string exe = ESR_CLI_PATH;
  ProtocolRun r{root / ("corpus_" + tag), root / ("model_" + tag + ".esr"), root / ("report_" + tag + ".json")};
  const auto t0 = Clock::now();
  r.ok = run(exe + " gen --corpus " + r.corpus.string() + " --seed 42 --samples 50", root / ("gen_" + tag + ".log")) ==
             0 &&
         run(exe + " train --corpus " + r.corpus.string() + " --model " + r.model.string(),
             root / ("train_" + tag + ".log")) == 0 &&
         run(exe + " eval --corpus " + r.corpus.string() + " --model " + r.model.string() + " --json " + r.json.string(),
             root / ("eval_" + tag + ".log")) == 0;
  r.seconds = seconds_since(t0);
  return r;
}

void substitute_protocol(const ProtocolRun& run1) {
  if (!run1.ok) {
    report(false, "held-out accuracy", "CLI gen/train/eval failed, see logs");
    report(false, "template sentences", "no model");
    return;
  }
  const Corpus c = load_corpus(run1.corpus);
  const MlpModel m = load_model(run1.model);
  const auto halves = split(c, 0.8, TrainConfig{}.seed);
  const double acc = glyph_accuracy(halves.second.glyphs, m);
  report(acc >= 0.90 && run1.seconds < 300.0 && c.glyphs.size() == 1300 && halves.second.glyphs.size() == 260,
         "held-out accuracy",
         fmt("%.2f%%", 100.0 * acc) + " on " + std::to_string(halves.second.glyphs.size()) +
             " glyphs (>= 90%), gen+train+eval " + fmt("%.0f", run1.seconds) + " s (< 300 s)");

  double sum = 0.0, lowest = 100.0;
  std::string rows;
  for (const auto& s : protocol_sentences()) {
    const auto r = recognize_sentence(generate_sentence(s, still()), m, {});
    const double rate = character_rate(s, r.text);
    sum += rate;
    lowest = std::min(lowest, rate);
    rows += fmt(" %.1f", rate);
  }
  const double avg = sum / static_cast<double>(protocol_sentences().size());
  report(avg >= 95.0, "template sentences", "rates" + rows + ", average " + fmt("%.1f%%", avg) + " (>= 95%)");
}

void determinism(const ProtocolRun& a, const ProtocolRun& b) {
  if (!a.ok || !b.ok) {
    report(false, "determinism", "a CLI run failed");
    return;
  }
  const bool corpus = read_tree(a.corpus) == read_tree(b.corpus);
  const bool model = read_file_bytes(a.model) == read_file_bytes(b.model);
  const bool json = read_file_bytes(a.json) == read_file_bytes(b.json);
  report(corpus && model && json, "determinism",
         std::string("corpus ") + (corpus ? "identical" : "DIFFERS") + ", model " + (model ? "identical" : "DIFFERS") +
             ", report " + (json ? "identical" : "DIFFERS"));
}

void service_equivalence(const ProtocolRun& run1) {
  if (!run1.ok) {
    report(false, "service equivalence", "no model");
    return;
  }
  RecognitionService svc;
  svc.load_model_file(run1.model);
  const MlpModel m = load_model(run1.model);
  httplib::Server server;
  svc.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  std::vector<StrokeTrace> traces;
  for (const auto& s : protocol_sentences()) traces.push_back(generate_sentence(s, still()));
  for (int i = 0; traces.size() < 20; ++i) {
    GeneratorConfig cfg;
    cfg.seed = 1000 + static_cast<std::uint64_t>(i);
    traces.push_back(generate_sentence(protocol_sentences()[static_cast<std::size_t>(i) % 5], cfg));
  }
  int equal = 0;
  for (const auto& t : traces) {
    auto res = client.Post("/api/v1/recognize", trace_to_json(t).dump(), "application/json");
    if (res && res->status == 200 && res->body == sentence_to_json(recognize_sentence(t, m, {})).dump()) ++equal;
  }
  server.stop();
  th.join();
  report(equal == 20, "service equivalence",
         std::to_string(equal) + "/20 POST /api/v1/recognize bodies byte-equal to the library, no UI built");
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / ("esr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  architecture();
  hyperparameters();
  gradients();
  thinning();
  hebbian();

  std::printf("running gen/train/eval twice through %s ...\n", ESR_CLI_PATH);
  std::fflush(stdout);
  const ProtocolRun run1 = protocol_run(root, "a");
  const ProtocolRun run2 = protocol_run(root, "b");

  if (run1.ok) features(load_corpus(run1.corpus));
  else report(false, "feature invariants", "corpus missing");
  substitute_protocol(run1);
  determinism(run1, run2);
  service_equivalence(run1);

  fs::remove_all(root);
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
