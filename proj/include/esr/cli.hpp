#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "esr/corpus.hpp"
#include "esr/error.hpp"
#include "esr/neuralnet.hpp"
#include "esr/recognizer.hpp"
#include "esr/service.hpp"
#include "json.hpp"

namespace esr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace cli {

inline std::atomic<bool> reload_requested{false};
inline std::atomic<bool> stop_requested{false};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out << text;
}

inline std::string fmt_double(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace cli

/// Entry point of the `esr` tool. Exit codes: 0 success, 1 usage error,
/// 2 data or model error (reported as "<ErrorName>: detail" on `err`).
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Mouse-gesture sentence recognizer", "esr"};
  app.require_subcommand(1);

  std::string corpus_dir;
  std::string model_path;
  std::uint64_t seed = 0;

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic glyph and sentence corpus");
  GeneratorConfig gen_cfg;
  gen->add_option("--corpus", corpus_dir, "output directory")->required();
  gen->add_option("--seed", gen_cfg.seed, "generator seed")->capture_default_str();
  gen->add_option("--samples", gen_cfg.samples_per_class, "samples per letter")->capture_default_str();
  gen->add_option("--rotation", gen_cfg.jitter_rotation, "rotation jitter, degrees")->capture_default_str();
  gen->add_option("--scale", gen_cfg.jitter_scale, "scale jitter, fraction")->capture_default_str();
  gen->add_option("--noise", gen_cfg.jitter_noise, "per-point noise, fraction of glyph size")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train the 12-200-26 network on a corpus");
  TrainConfig train_cfg;
  double train_fraction = 0.8;
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("--model", model_path, "output model file")->envname("ESR_MODEL")->required();
  train->add_option("--seed", train_cfg.seed, "split, initialization and shuffle seed")->capture_default_str();
  train->add_option("--epochs", train_cfg.max_epochs, "maximum epochs")->capture_default_str();
  train->add_option("--lr", train_cfg.learning_rate, "learning rate")->capture_default_str();
  train->add_option("--momentum", train_cfg.momentum, "momentum")->capture_default_str();
  train->add_option("--train-fraction", train_fraction, "share of each class used for training")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate sentence recognition on a corpus");
  std::string json_path;
  eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
  eval->add_option("--model", model_path, "model file")->envname("ESR_MODEL")->required();
  eval->add_option("--json", json_path, "also write the JSON report here");

  // recognize
  auto* recog = app.add_subcommand("recognize", "recognize one trace file");
  std::string trace_path;
  bool debug = false;
  recog->add_option("trace", trace_path, "trace JSON file")->required();
  recog->add_option("--model", model_path, "model file")->envname("ESR_MODEL")->required();
  recog->add_flag("--debug", debug, "print per-character features and skeletons");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP recognition service");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;
  serve->add_option("--model", model_path, "model file (reloaded on SIGHUP)")->envname("ESR_MODEL");
  serve->add_option("--port", port, "listen port")->capture_default_str();
  serve->add_option("--host", host, "listen address")->capture_default_str();
  serve->add_option("--static", static_dir, "directory of static UI assets to serve at /");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "compare backprop gradients with finite differences");
  int samples = 10;
  double eps = 1e-5;
  gradcheck->add_option("--model", model_path, "model file (random initialization when omitted)");
  gradcheck->add_option("--seed", seed, "seed for the random model and samples")->capture_default_str();
  gradcheck->add_option("--samples", samples, "number of random samples")->capture_default_str();
  gradcheck->add_option("--eps", eps, "finite-difference step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      Corpus c = generate_glyphs(gen_cfg);
      for (const auto& s : protocol_sentences()) c.sentences.push_back({generate_sentence(s, gen_cfg), s});
      save_corpus(c, corpus_dir);
      out << "wrote " << c.glyphs.size() << " glyphs and " << c.sentences.size() << " sentences to " << corpus_dir
          << "\n";
      return kExitOk;
    }

    if (train->parsed()) {
      const Corpus c = load_corpus(corpus_dir);
      const auto [train_half, held_half] = split(c, train_fraction, train_cfg.seed);
      const auto data = glyph_dataset(train_half.glyphs);
      auto result = train_backprop(init_random(train_cfg), data, train_cfg);
      save_model(result.model, model_path);
      const TrainReport& r = result.report;
      nlohmann::json side = {{"train_config", train_config_to_json(train_cfg)},
                             {"report",
                              {{"epochs_run", r.epochs_run},
                               {"final_sse", r.final_sse},
                               {"stopped_early", r.stopped_early},
                               {"train_items", train_half.glyphs.size()}}}};
      if (!held_half.glyphs.empty()) side["report"]["heldout_accuracy"] = glyph_accuracy(held_half.glyphs, result.model);
      cli::write_text(model_sidecar_path(model_path), side.dump(2) + "\n");

      out << "epochs_run: " << r.epochs_run << "\n"
          << "final_sse: " << cli::fmt_double("%.6f", r.final_sse) << "\n"
          << "stopped_early: " << (r.stopped_early ? "true" : "false") << "\n"
          << "train_glyphs: " << train_half.glyphs.size() << "\n";
      if (side["report"].contains("heldout_accuracy")) {
        out << "heldout_accuracy: "
            << cli::fmt_double("%.4f", side["report"]["heldout_accuracy"].get<double>()) << "\n";
      }
      out << "model: " << model_path << "\n";
      return kExitOk;
    }

    if (eval->parsed()) {
      const Corpus c = load_corpus(corpus_dir);
      const MlpModel m = load_model(model_path);
      const EvalReport report = evaluate(c.sentences, m, SegmentationParams{});
      out << report.to_table();
      if (!json_path.empty()) cli::write_text(json_path, report.to_json().dump() + "\n");
      return kExitOk;
    }

    if (recog->parsed()) {
      std::ifstream in(trace_path, std::ios::binary);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + trace_path);
      const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      const StrokeTrace t = trace_from_string(text);
      const MlpModel m = load_model(model_path);
      const SentenceResult r = recognize_sentence(t, m, SegmentationParams{}, debug);
      out << r.text << "\n";
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      if (debug) {
        std::size_t k = 0;
        for (const auto& word : r.words)
          for (const auto& ch : word) {
            out << "char " << k << " " << ch.tag << " confidence " << cli::fmt_double("%.4f", ch.confidence)
                << " features " << format_features(r.debug[k].features) << "\n"
                << r.debug[k].pbm;
            ++k;
          }
      }
      return kExitOk;
    }

    if (serve->parsed()) {
      RecognitionService service;
      if (!model_path.empty()) service.load_model_file(model_path);
      httplib::Server server;
      service.bind(server, static_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(static_dir));
      std::signal(SIGHUP, [](int) { cli::reload_requested = true; });
      std::thread watcher([&] {
        while (!cli::stop_requested) {
          std::this_thread::sleep_for(std::chrono::milliseconds(200));
          if (cli::reload_requested.exchange(false) && !model_path.empty()) {
            try {
              service.load_model_file(model_path);
              err << "reloaded model " << model_path << "\n";
            } catch (const Error& e) {
              err << "reload failed, keeping previous model: " << e.what() << "\n";
            }
          }
        }
      });
      out << "listening on http://" << host << ":" << port << "\n" << std::flush;
      const bool ok = server.listen(host, port);
      cli::stop_requested = true;
      watcher.join();
      if (!ok) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
      return kExitOk;
    }

    if (gradcheck->parsed()) {
      TrainConfig cfg;
      cfg.seed = seed;
      const MlpModel m = model_path.empty() ? init_random(cfg) : load_model(model_path);
      Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
      double worst = 0.0;
      for (int s = 0; s < samples; ++s) {
        LabeledFeatures sample;
        double total = 0.0;
        for (std::size_t k = 0; k < kInputs; ++k) total += (sample.features[k] = rng.uniform01());
        for (std::size_t k = 0; k < kInputs; ++k) sample.features[k] /= total;
        sample.label = static_cast<int>(rng.below(kOutputs));
        worst = std::max(worst, gradient_check(m, sample, eps));
      }
      out << "max_relative_error: " << cli::fmt_double("%.3e", worst) << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "IoError: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace esr
