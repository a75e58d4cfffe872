#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "covergraph/generation.hpp"
#include "covergraph/graph_model.hpp"

namespace httplib {
class Server;
}

namespace covergraph {

/// Request body of POST /generate:
///   {"graph": <layout graph>, "seed"?: uint, "noise_seeds"?: {id: uint},
///    "title_text"?: str, "variations"?: 1..16, "format"?: "png"}
/// Throws ParseError with a JSON pointer into the body.
GenerationRequest parse_generation_request(const nlohmann::json& body);

/// Violations of the request against the loaded model, paths rooted at the
/// request body ("/graph/objects/0/category", "/variations", ...).
ValidationReport validate_generation_request(const InferenceModel& model, const GenerationRequest& request);

/// {"images": [{"format", "encoding", "data"}], "objects": [{"id", "box"}],
///  "warnings": [...], "title_backends": [...], "timing": {...},
///  "checkpoint_iteration": n}
nlohmann::ordered_json generation_response(const GenerationResult& result, std::int64_t iteration,
                                           double total_ms);

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int threads = 8;
  TitleBackend title;
};

/// HTTP front end. Until a model is installed, /generate and /categories
/// answer 503 and /healthz reports "loading".
class CoverService {
 public:
  explicit CoverService(ServiceOptions options);
  ~CoverService();

  void set_model(std::shared_ptr<const InferenceModel> model);
  std::shared_ptr<const InferenceModel> model() const;

  HttpReply handle_generate(const std::string& body) const;
  HttpReply handle_categories() const;
  HttpReply handle_healthz() const;

  /// Binds the socket; returns the bound port.
  int bind();
  /// Serves until stop(); call bind() first.
  void run();
  void stop();

 private:
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex model_mutex_;
  std::shared_ptr<const InferenceModel> model_;
};

}  // namespace covergraph
