#include "covergraph/service.hpp"

#include <chrono>
#include <set>

#include <httplib.h>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"

namespace covergraph {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t require_seed(const json& value, const std::string& path) {
  if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
    throw ParseError(path, "expected a non-negative integer");
  }
  return value.get<std::uint64_t>();
}

std::string json_body(const ordered_json& j) { return j.dump(); }

HttpReply error_reply(int status, const std::string& kind, const std::string& message,
                      const std::vector<Violation>& violations = {}) {
  ordered_json body;
  body["error"] = kind;
  body["message"] = message;
  body["violations"] = ordered_json::array();
  for (const auto& v : violations) {
    body["violations"].push_back({{"path", v.path}, {"message", v.message}});
  }
  return {status, json_body(body)};
}

}  // namespace

GenerationRequest parse_generation_request(const json& body) {
  if (!body.is_object()) {
    throw ParseError("", "request body must be a JSON object");
  }
  static const std::set<std::string> kFields = {"graph", "seed", "noise_seeds", "title_text", "variations", "format"};
  for (const auto& [key, _] : body.items()) {
    if (!kFields.contains(key)) {
      throw ParseError("/" + key, "unknown field");
    }
  }
  if (!body.contains("graph")) {
    throw ParseError("/graph", "missing required field");
  }
  GenerationRequest request;
  request.graph = graph_from_json(body["graph"], "/graph");
  if (body.contains("seed")) {
    request.seed = require_seed(body["seed"], "/seed");
  }
  if (body.contains("noise_seeds")) {
    const auto& seeds = body["noise_seeds"];
    if (!seeds.is_object()) {
      throw ParseError("/noise_seeds", "expected an object");
    }
    for (const auto& [id, value] : seeds.items()) {
      request.noise_seeds[id] = require_seed(value, "/noise_seeds/" + id);
    }
  }
  if (body.contains("title_text")) {
    if (!body["title_text"].is_string()) {
      throw ParseError("/title_text", "expected a string");
    }
    request.title_text = body["title_text"].get<std::string>();
  }
  if (body.contains("variations")) {
    if (!body["variations"].is_number_integer()) {
      throw ParseError("/variations", "expected an integer");
    }
    const auto v = body["variations"].get<std::int64_t>();
    if (v < 1 || v > kMaxVariations) {
      throw ParseError("/variations", "must lie in 1.." + std::to_string(kMaxVariations));
    }
    request.variations = static_cast<int>(v);
  }
  if (body.contains("format") && body["format"] != "png") {
    throw ParseError("/format", "only \"png\" is supported");
  }
  return request;
}

ValidationReport validate_generation_request(const InferenceModel& model, const GenerationRequest& request) {
  auto report =
      validate_graph(request.graph, model.vocabulary, static_cast<int>(model.config.model.appearance_dim));
  for (auto& v : report.violations) {
    v.path = "/graph" + v.path;
  }
  if (request.graph.objects.empty()) {
    report.violations.push_back({"/graph/objects", "a cover needs at least one object"});
  }
  if (request.variations < 1 || request.variations > kMaxVariations) {
    report.violations.push_back({"/variations", "must lie in 1.." + std::to_string(kMaxVariations)});
  }
  for (const auto& [id, _] : request.noise_seeds) {
    if (!request.graph.index_of(id)) {
      report.violations.push_back({"/noise_seeds/" + id, "unknown object id"});
    }
  }
  if (request.title_text && request.title_text->empty()) {
    report.violations.push_back({"/title_text", "must not be empty"});
  }
  return report;
}

ordered_json generation_response(const GenerationResult& result, std::int64_t iteration, double total_ms) {
  ordered_json out;
  out["images"] = ordered_json::array();
  for (const auto& image : result.images) {
    const auto png = encode_png(image);
    out["images"].push_back({{"format", "png"},
                             {"encoding", "base64"},
                             {"width", image.cols},
                             {"height", image.rows},
                             {"data", httplib::detail::base64_encode(std::string(png.begin(), png.end()))}});
  }
  out["objects"] = ordered_json::array();
  for (const auto& o : result.objects) {
    out["objects"].push_back({{"id", o.id}, {"box", {o.box.x0, o.box.y0, o.box.x1, o.box.y1}}});
  }
  out["warnings"] = result.warnings;
  out["title_backends"] = result.title_backends;
  out["timing"] = {{"network_ms", result.network_ms}, {"title_ms", result.title_ms}, {"total_ms", total_ms}};
  out["checkpoint_iteration"] = iteration;
  return out;
}

// ---------------------------------------------------------------------------

CoverService::CoverService(ServiceOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const int threads = std::max(options_.threads, 1);
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server_->Post("/generate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_generate(req.body));
  });
  server_->Get("/categories",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_categories()); });
  server_->Get("/healthz",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_healthz()); });
}

CoverService::~CoverService() { stop(); }

void CoverService::set_model(std::shared_ptr<const InferenceModel> model) {
  std::lock_guard lock(model_mutex_);
  model_ = std::move(model);
}

std::shared_ptr<const InferenceModel> CoverService::model() const {
  std::lock_guard lock(model_mutex_);
  return model_;
}

HttpReply CoverService::handle_generate(const std::string& body) const {
  const auto started = std::chrono::steady_clock::now();
  auto m = model();
  if (!m) {
    return error_reply(503, "loading", "checkpoint is still loading");
  }
  GenerationRequest request;
  try {
    request = parse_generation_request(json::parse(body));
  } catch (const json::exception& e) {
    return error_reply(400, "parse", e.what(), {{"", "request body is not valid JSON"}});
  } catch (const ParseError& e) {
    return error_reply(400, "validation", e.what(), {{e.path(), e.what()}});
  } catch (const ValidationError& e) {
    return error_reply(400, "validation", e.what());
  }
  const auto report = validate_generation_request(*m, request);
  if (!report.ok()) {
    return error_reply(400, "validation", "invalid request", report.violations);
  }
  try {
    auto result = generate_covers(*m, request, options_.title);
    const double total =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return {200, json_body(generation_response(result, m->iteration, total))};
  } catch (const ValidationError& e) {
    return error_reply(400, "validation", e.what());
  } catch (const std::exception& e) {
    log::error(std::string("generation failed: ") + e.what());
    return error_reply(500, "internal", e.what());
  }
}

HttpReply CoverService::handle_categories() const {
  auto m = model();
  if (!m) {
    return error_reply(503, "loading", "checkpoint is still loading");
  }
  ordered_json body;
  body["categories"] = m->vocabulary.entries();
  return {200, json_body(body)};
}

HttpReply CoverService::handle_healthz() const {
  auto m = model();
  ordered_json body;
  if (!m) {
    body["status"] = "loading";
    return {503, json_body(body)};
  }
  body["status"] = "ok";
  body["checkpoint_iteration"] = m->iteration;
  body["parameter_checksum"] = m->checksum();
  return {200, json_body(body)};
}

int CoverService::bind() {
  const int port = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                                      : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port < 0) {
    throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return port;
}

void CoverService::run() {
  if (!server_->listen_after_bind()) {
    throw IoError("service stopped unexpectedly");
  }
}

void CoverService::stop() {
  if (server_ && server_->is_running()) {
    server_->stop();
  }
}

}  // namespace covergraph
