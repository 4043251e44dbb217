#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "esr/error.hpp"
#include "esr/neuralnet.hpp"
#include "esr/recognizer.hpp"
#include "httplib.h"
#include "json.hpp"

namespace esr {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// Training metadata written next to a model file as <model>.json by `esr train`.
inline std::filesystem::path model_sidecar_path(const std::filesystem::path& model) {
  return std::filesystem::path(model.string() + ".json");
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}, {"max_epochs", c.max_epochs},
          {"target_sse", c.target_sse},       {"seed", c.seed},         {"target_hi", c.target_hi},
          {"target_lo", c.target_lo}};
}

struct LoadedModel {
  MlpModel model;
  std::string digest;                 // sha256 of the model file bytes
  nlohmann::json train_config = nullptr;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Read-only recognition service. Requests run against whichever complete
/// model snapshot is current when they start; replace_model swaps the whole
/// value under a lock.
class RecognitionService {
 public:
  explicit RecognitionService(SegmentationParams params = {}) : params_(params) { params_.validate(); }

  void replace_model(std::shared_ptr<const LoadedModel> next) {
    std::lock_guard lock(mutex_);
    model_ = std::move(next);
  }

  void replace_model(MlpModel m, std::string digest, nlohmann::json train_config = nullptr) {
    replace_model(std::make_shared<const LoadedModel>(LoadedModel{std::move(m), std::move(digest), std::move(train_config)}));
  }

  /// Loads a model file (and its training sidecar when present) and swaps it in.
  void load_model_file(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    MlpModel m = deserialize_model(bytes);
    nlohmann::json cfg = nullptr;
    const auto sidecar = model_sidecar_path(path);
    if (std::filesystem::is_regular_file(sidecar)) {
      std::ifstream in(sidecar);
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.contains("train_config")) cfg = j["train_config"];
    }
    replace_model(std::move(m), sha256_hex(bytes), std::move(cfg));
  }

  std::shared_ptr<const LoadedModel> current() const {
    std::lock_guard lock(mutex_);
    return model_;
  }

  HttpReply handle_recognize(const std::string& body, bool debug_query = false) const {
    const auto snapshot = current();
    if (!snapshot) return error_reply(503, "NoModel", "no model is loaded");

    StrokeTrace trace;
    bool debug = debug_query;
    try {
      nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, "body is not valid JSON");
      if (j.is_object() && j.contains("trace")) {
        if (j.contains("debug")) {
          if (!j["debug"].is_boolean()) throw Error(ErrorCode::SchemaViolation, "'debug' must be a boolean");
          debug = debug || j["debug"].get<bool>();
        }
        trace = trace_from_json(j["trace"]);
      } else {
        trace = trace_from_json(j);
      }
      validate_trace(trace);
    } catch (const Error& e) {
      return error_reply(400, e.name(), e.what());
    }

    try {
      const SentenceResult r = recognize_sentence(trace, snapshot->model, params_, debug);
      return {200, sentence_to_json(r).dump()};
    } catch (const Error& e) {
      return error_reply(400, e.name(), e.what());
    }
  }

  HttpReply handle_model_info() const {
    const auto snapshot = current();
    if (!snapshot) return {200, nlohmann::json{{"status", "unloaded"}}.dump()};
    nlohmann::json j = {{"status", "loaded"},
                        {"dims", {{"input", kInputs}, {"hidden", kHidden}, {"output", kOutputs}}},
                        {"neurons", kNeuronCount},
                        {"parameters", kParameterCount},
                        {"train_config", snapshot->train_config},
                        {"digest", snapshot->digest}};
    return {200, j.dump()};
  }

  HttpReply handle_health() const {
    return {200, nlohmann::json{{"status", "ok"}, {"model_loaded", current() != nullptr}}.dump()};
  }

  /// Registers the /api/v1 routes on `server`. Static assets, when a
  /// directory is given, are served from "/".
  void bind(httplib::Server& server, const std::optional<std::filesystem::path>& static_dir = std::nullopt) const {
    auto send = [](httplib::Response& res, const HttpReply& reply) {
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    };
    server.Post("/api/v1/recognize", [this, send](const httplib::Request& req, httplib::Response& res) {
      bool debug = false;
      if (req.has_param("debug")) {
        const auto v = req.get_param_value("debug");
        debug = v == "true" || v == "1";
      }
      send(res, handle_recognize(req.body, debug));
    });
    server.Get("/api/v1/model", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, handle_model_info());
    });
    server.Get("/api/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, handle_health());
    });
    if (static_dir) server.set_mount_point("/", static_dir->string());
  }

 private:
  static HttpReply error_reply(int status, std::string_view name, const std::string& message) {
    return {status, nlohmann::json{{"error", name}, {"message", message}}.dump()};
  }

  SegmentationParams params_;
  mutable std::mutex mutex_;
  std::shared_ptr<const LoadedModel> model_;
};

}  // namespace esr
