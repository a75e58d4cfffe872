// covergraph: train | generate | serve | synth

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "covergraph/config.hpp"
#include "covergraph/data_pipeline.hpp"
#include "covergraph/errors.hpp"
#include "covergraph/generation.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"
#include "covergraph/service.hpp"
#include "covergraph/training.hpp"

namespace fs = std::filesystem;
using namespace covergraph;

namespace {

CoverService* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) {
    g_service->stop();
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TitleBackend make_backend(const std::string& kind, const std::string& command) {
  return TitleBackend{parse_title_backend(kind), command};
}

struct TrainArgs {
  std::string config;
  std::string profile;
  std::string out;
  std::string checkpoint;
  std::int64_t steps = 0;
  std::int64_t seed = -1;
  std::int64_t threads = 0;
  std::int64_t samples = 0;
};

int cmd_train(const TrainArgs& a) {
  TrainingConfig config = !a.config.empty() ? load_config(a.config) : profile_config(a.profile.empty() ? "full" : a.profile);
  if (!a.config.empty() && !a.profile.empty() && a.profile != config.profile) {
    throw ConfigError("--profile '" + a.profile + "' conflicts with the config's profile '" + config.profile + "'");
  }
  if (a.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(a.seed);
  }
  if (a.threads > 0) {
    config.threads = a.threads;
  }
  RunOptions run;
  run.run_dir = a.out.empty() ? fs::path("runs") / config.profile : fs::path(a.out);
  if (!a.checkpoint.empty()) {
    run.resume = a.checkpoint;
  }
  if (a.steps > 0) {
    run.max_steps = a.steps;
  }
  run.sample_every = a.samples;
  run.on_step = [](std::int64_t step, const LossBundle& b) {
    if (step % 10 == 0) {
      std::ostringstream line;
      line << "step " << step << " total " << b.total << " pixel " << b.terms[0];
      log::info(line.str());
    }
  };
  const auto last = run_training(config, run);
  std::cout << (last.empty() ? std::string("no steps run") : "checkpoint: " + last.string()) << "\n";
  return 0;
}

struct GenerateArgs {
  std::string graph;
  std::string checkpoint;
  std::string out = "covers";
  std::uint64_t seed = 0;
  int variations = 1;
  std::string title;
  std::vector<std::string> noise_seeds;
  std::string title_backend = "fallback";
  std::string title_command;
};

int cmd_generate(const GenerateArgs& a) {
  const auto backend = make_backend(a.title_backend, a.title_command);
  GenerationRequest request;
  request.graph = parse_graph(read_text(a.graph));
  request.seed = a.seed;
  request.variations = a.variations;
  if (!a.title.empty()) {
    request.title_text = a.title;
  }
  for (const auto& item : a.noise_seeds) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--noise-seed expects id=value, got '" + item + "'");
    }
    try {
      request.noise_seeds[item.substr(0, eq)] = std::stoull(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("--noise-seed value is not an unsigned integer: '" + item + "'");
    }
  }
  auto model = load_inference_model(a.checkpoint);
  const auto report = validate_generation_request(*model, request);
  if (!report.ok()) {
    std::cerr << report.to_string();
    throw ValidationError("invalid generation request");
  }
  auto result = generate_covers(*model, request, backend);
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < result.images.size(); ++i) {
    const auto path = fs::path(a.out) / ("cover_" + std::to_string(i) + ".png");
    write_png(path, result.images[i]);
    std::cout << path.string() << "\n";
  }
  for (const auto& o : result.objects) {
    std::cout << o.id << " " << o.box.x0 << " " << o.box.y0 << " " << o.box.x1 << " " << o.box.y1 << "\n";
  }
  return 0;
}

struct ServeArgs {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 8;
  std::string title_backend = "fallback";
  std::string title_command;
};

int cmd_serve(const ServeArgs& a) {
  ServiceOptions options;
  options.host = a.host;
  options.port = a.port;
  options.threads = a.threads;
  options.title = make_backend(a.title_backend, a.title_command);
  CoverService service(options);
  const int port = service.bind();
  log::info("listening on " + a.host + ":" + std::to_string(port));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  // Requests get 503 until the checkpoint is in memory.
  std::exception_ptr load_error;
  std::thread loader([&] {
    try {
      service.set_model(load_inference_model(a.checkpoint));
      log::info("checkpoint loaded: " + a.checkpoint);
    } catch (...) {
      load_error = std::current_exception();
      service.stop();
    }
  });
  service.run();
  loader.join();
  g_service = nullptr;
  if (load_error) {
    std::rethrow_exception(load_error);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout-graph book cover generator"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train the generator");
  t->add_option("--config", train.config, "JSON config file");
  t->add_option("--profile", train.profile, "full, overfit10 or smoke500");
  t->add_option("--out", train.out, "run directory (default runs/<profile>)");
  t->add_option("--checkpoint", train.checkpoint, "resume from this checkpoint directory");
  t->add_option("--steps", train.steps, "stop after this many steps");
  t->add_option("--seed", train.seed, "override the config seed");
  t->add_option("--threads", train.threads, "torch intra-op threads");
  t->add_option("--samples", train.samples, "write a real/generated image grid every N steps");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "render covers for a layout graph");
  g->add_option("--graph", gen.graph, "layout graph document")->required();
  g->add_option("--checkpoint", gen.checkpoint, "checkpoint directory")->required();
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed, "request seed");
  g->add_option("--variations", gen.variations, "number of covers (1-16)");
  g->add_option("--title", gen.title, "replace the title object's text");
  g->add_option("--noise-seed", gen.noise_seeds, "per-object mask noise seed, id=value");
  g->add_option("--title-backend", gen.title_backend, "fallback or external");
  g->add_option("--title-command", gen.title_command, "external style-transfer program");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "HTTP inference service");
  s->add_option("--checkpoint", serve.checkpoint, "checkpoint directory")->required();
  s->add_option("--host", serve.host);
  s->add_option("--port", serve.port);
  s->add_option("--threads", serve.threads, "worker threads");
  s->add_option("--title-backend", serve.title_backend, "fallback or external");
  s->add_option("--title-command", serve.title_command, "external style-transfer program");

  SyntheticCorpusOptions synth;
  std::string synth_out;
  auto* y = app.add_subcommand("synth", "write a small synthetic scene and cover corpus");
  y->add_option("--out", synth_out, "corpus directory")->required();
  y->add_option("--scenes", synth.scenes);
  y->add_option("--covers", synth.covers);
  y->add_option("--seed", synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::validation);
  }

  const std::map<std::string, log::Level> levels = {
      {"debug", log::Level::debug}, {"info", log::Level::info}, {"warn", log::Level::warn}, {"error", log::Level::error}};
  log::set_min_level(levels.at(log_level));

  try {
    if (*t) {
      return cmd_train(train);
    }
    if (*g) {
      return cmd_generate(gen);
    }
    if (*s) {
      return cmd_serve(serve);
    }
    synth.root = synth_out;
    write_synthetic_corpus(synth);
    std::cout << synth_out << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const c10::Error& e) {
    std::cerr << "error: " << e.what_without_backtrace() << "\n";
    return static_cast<int>(ExitCode::failure);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::failure);
  }
}
