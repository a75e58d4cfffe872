#include "covergraph/generation.hpp"

#include <chrono>

#include "covergraph/errors.hpp"
#include "covergraph/graph_encoder.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"

namespace covergraph {

namespace {

std::uint64_t mix(std::initializer_list<std::uint64_t> words) {
  auto h = fnv1a(nullptr, 0);
  for (auto w : words) {
    h = fnv1a(&w, sizeof w, h);
  }
  return h;
}

torch::Tensor seeded_normal(std::uint64_t seed, std::int64_t n) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::randn({n}, gen);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

bool overlaps(const BoundingBox& a, const BoundingBox& b) {
  return std::min(a.x1, b.x1) > std::max(a.x0, b.x0) && std::min(a.y1, b.y1) > std::max(a.y0, b.y0);
}

std::shared_ptr<InferenceModel> freeze(std::shared_ptr<InferenceModel> m) {
  m->generator->eval();
  for (auto& p : m->generator->parameters()) {
    p.set_requires_grad(false);
  }
  return m;
}

}  // namespace

std::string InferenceModel::checksum() const {
  return parameter_checksum(*generator) + parameter_checksum(*bank);
}

std::shared_ptr<const InferenceModel> load_inference_model(const std::filesystem::path& checkpoint) {
  auto trainer = Trainer::load(checkpoint);
  return inference_model_from(trainer);
}

std::shared_ptr<const InferenceModel> inference_model_from(const Trainer& trainer) {
  auto m = std::make_shared<InferenceModel>();
  m->config = trainer.config();
  m->vocabulary = trainer.vocabulary();
  m->generator = CoverModel(m->config.model, static_cast<std::int64_t>(m->vocabulary.size()));
  m->bank = AppearanceBank(static_cast<std::int64_t>(m->vocabulary.size()), m->config.model.appearance_dim);
  {
    torch::NoGradGuard no_grad;
    auto src = trainer.generator->named_parameters(true);
    for (auto& item : m->generator->named_parameters(true)) {
      item.value().copy_(src[item.key()]);
    }
    auto src_buffers = trainer.generator->named_buffers(true);
    for (auto& item : m->generator->named_buffers(true)) {
      item.value().copy_(src_buffers[item.key()]);
    }
    auto bank_buffers = trainer.bank->named_buffers(true);
    for (auto& item : m->bank->named_buffers(true)) {
      item.value().copy_(bank_buffers[item.key()]);
    }
  }
  m->iteration = trainer.iteration;
  return freeze(std::move(m));
}

void check_request(const InferenceModel& model, const GenerationRequest& request) {
  const auto report =
      validate_graph(request.graph, model.vocabulary, static_cast<int>(model.config.model.appearance_dim));
  if (!report.ok()) {
    throw ValidationError("invalid layout graph:\n" + report.to_string());
  }
  if (request.graph.objects.empty()) {
    throw ValidationError("/objects: a cover needs at least one object");
  }
  if (request.variations < 1 || request.variations > kMaxVariations) {
    throw ValidationError("/variations: must lie in 1.." + std::to_string(kMaxVariations));
  }
  for (const auto& [id, _] : request.noise_seeds) {
    if (!request.graph.index_of(id)) {
      throw ValidationError("/noise_seeds/" + id + ": unknown object id");
    }
  }
  if (request.title_text && request.title_text->empty()) {
    throw ValidationError("/title_text: must not be empty");
  }
}

GenerationResult generate_covers(const InferenceModel& model, const GenerationRequest& request,
                                 const TitleBackend& backend) {
  check_request(model, request);
  torch::NoGradGuard no_grad;
  const auto& graph = request.graph;
  const auto n = static_cast<std::int64_t>(graph.objects.size());
  const auto dim = model.config.model.appearance_dim;
  const auto noise_dim = model.config.model.noise_dim;
  auto net = model.generator.ptr();
  const auto tensors = to_graph_tensors(graph, model.vocabulary);

  GenerationResult result;
  const auto started = std::chrono::steady_clock::now();
  // Boxes depend on the graph only.
  const auto embeddings = net->encoder->forward(tensors);
  const auto boxes = net->box_head->forward(embeddings);
  for (std::int64_t i = 0; i < n; ++i) {
    result.objects.push_back({graph.objects[static_cast<std::size_t>(i)].id, box_from_tensor(boxes[i])});
  }

  std::vector<torch::Tensor> variation_images;
  for (int v = 0; v < request.variations; ++v) {
    const auto vv = static_cast<std::uint64_t>(v);
    std::vector<torch::Tensor> appearances, noise;
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& obj = graph.objects[static_cast<std::size_t>(i)];
      const auto category = model.vocabulary.id(obj.category);
      const auto index = static_cast<std::uint64_t>(i);
      torch::Tensor a;
      switch (obj.appearance.mode) {
        case AppearanceControl::Mode::explicit_vector:
          a = torch::tensor(obj.appearance.vector, torch::kFloat32);
          break;
        case AppearanceControl::Mode::seed: {
          const auto s = obj.appearance.seed;
          auto picked = model.bank->pick(category, s);
          a = picked ? *picked : seeded_normal(mix({static_cast<std::uint64_t>(s), 1}), dim);
          break;
        }
        case AppearanceControl::Mode::random: {
          const auto draw = mix({request.seed, vv, index, 2});
          auto picked = model.bank->pick(category, static_cast<std::int64_t>(draw >> 1));
          a = picked ? *picked : seeded_normal(draw, dim);
        }
      }
      appearances.push_back(a);
      const auto it = request.noise_seeds.find(obj.id);
      const auto noise_seed = it != request.noise_seeds.end() ? it->second : mix({request.seed, index, 3});
      noise.push_back(seeded_normal(mix({noise_seed, vv}), noise_dim));
    }
    auto masks = net->mask_head->forward(embeddings, torch::stack(noise));
    auto layout = compose_feature_maps(boxes, masks, torch::stack(appearances), tensors.object_to_graph, 1);
    variation_images.push_back(net->cover->forward(layout)[0]);
  }
  result.network_ms = elapsed_ms(started);

  const auto title_started = std::chrono::steady_clock::now();
  const auto title = graph.title_index();
  std::optional<PixelRect> title_rect;
  if (title) {
    const auto& title_box = result.objects[*title].box;
    for (std::size_t i = 0; i < graph.objects.size(); ++i) {
      if (graph.objects[i].category == kSolidCategory && overlaps(title_box, result.objects[i].box)) {
        result.warnings.push_back("title box overlaps solid region '" + graph.objects[i].id + "'");
      }
    }
    title_rect = to_pixel_rect(title_box, kCanvasSize);
    if (title_rect->empty()) {
      result.warnings.push_back("title box is smaller than one pixel; title left unchanged");
      title_rect.reset();
    }
  }
  for (const auto& image : variation_images) {
    auto rgb = tensor_to_rgb8(image);
    if (title_rect) {
      const auto& r = *title_rect;
      TitleRegion region;
      region.box = r;
      region.crop = rgb(cv::Rect(static_cast<int>(r.x0), static_cast<int>(r.y0), static_cast<int>(r.width()),
                                 static_cast<int>(r.height())))
                        .clone();
      region.desired_text = request.title_text.value_or(graph.objects[*title].title_text.value_or(""));
      auto styled = transfer_title_style(region, backend);
      rgb = paste_title(rgb, styled.fused, r);
      result.title_backends.push_back(styled.backend);
    }
    result.images.push_back(rgb);
  }
  result.title_ms = elapsed_ms(title_started);
  for (const auto& w : result.warnings) {
    log::warn(w);
  }
  return result;
}

}  // namespace covergraph
