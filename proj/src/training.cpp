#include "covergraph/training.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"

namespace covergraph {

namespace fs = std::filesystem;
using nlohmann::json;

CoverModelImpl::CoverModelImpl(const ModelConfig& c, std::int64_t num_categories) {
  GraphEncoderOptions g;
  g.num_categories = num_categories;
  g.embedding_dim = c.embedding_dim;
  g.hidden_dim = c.gcn_hidden;
  g.candidate_dim = c.gcn_candidate;
  encoder = register_module("encoder", GraphEncoder(g));
  box_head = register_module("box_head", BoxRegressor(BoxRegressorOptions{g.output_dim, c.box_hidden}));
  mask_head =
      register_module("mask_head", MaskGenerator(MaskGeneratorOptions{g.output_dim, c.noise_dim, c.mask_channels}));
  appearance = register_module(
      "appearance", AppearanceEncoder(AppearanceEncoderOptions{c.appearance_dim, c.appearance_channels,
                                                               c.appearance_hidden}));
  CoverGeneratorOptions cg;
  cg.input_channels = c.appearance_dim + 1;
  cg.base_channels = c.generator_channels;
  cg.residual_blocks = c.residual_blocks;
  cover = register_module("cover", CoverGenerator(cg));
}

CoverModelImpl::Output CoverModelImpl::forward(const GraphTensors& graphs, const torch::Tensor& appearances,
                                               const torch::Tensor& noise,
                                               const std::optional<torch::Tensor>& placement_boxes) {
  Output out;
  out.embeddings = encoder->forward(graphs);
  out.boxes = box_head->forward(out.embeddings);
  out.masks = mask_head->forward(out.embeddings, noise);
  out.layout = compose_feature_maps(placement_boxes.value_or(out.boxes), out.masks, appearances,
                                    graphs.object_to_graph, graphs.num_graphs);
  out.image = cover->forward(out.layout);
  return out;
}

CriticsImpl::CriticsImpl(const ModelConfig& c, std::int64_t num_categories) {
  MaskDiscriminatorOptions m;
  m.num_categories = num_categories;
  m.base_channels = c.mask_critic_channels;
  mask = register_module("mask", MaskDiscriminator(m));
  layout = register_module(
      "layout", LayoutDiscriminator(LayoutDiscriminatorOptions{c.appearance_dim + 1, c.layout_critic_channels}));
  book = register_module("book", BookDiscriminator(BookDiscriminatorOptions{c.book_critic_channels}));
  object = register_module("object", ObjectDiscriminator(ObjectDiscriminatorOptions{
                                         num_categories, c.object_critic_channels, c.object_critic_hidden}));
}

// ---------------------------------------------------------------------------

AppearanceBankImpl::AppearanceBankImpl(std::int64_t num_categories, std::int64_t dim, std::int64_t capacity) {
  vectors = register_buffer("vectors", torch::zeros({num_categories, capacity, dim}));
  counts = register_buffer("counts", torch::zeros({num_categories}, torch::kInt64));
  cursor = register_buffer("cursor", torch::zeros({num_categories}, torch::kInt64));
}

void AppearanceBankImpl::push(const torch::Tensor& categories, const torch::Tensor& values) {
  torch::NoGradGuard no_grad;
  const auto capacity = vectors.size(1);
  auto v = values.detach().to(torch::kFloat32);
  for (std::int64_t i = 0; i < categories.size(0); ++i) {
    const auto c = categories[i].item<std::int64_t>();
    const auto slot = cursor[c].item<std::int64_t>();
    vectors[c][slot].copy_(v[i]);
    cursor[c] = (slot + 1) % capacity;
    counts[c] = std::min(counts[c].item<std::int64_t>() + 1, capacity);
  }
}

std::int64_t AppearanceBankImpl::count(std::int64_t category) const { return counts[category].item<std::int64_t>(); }

std::optional<torch::Tensor> AppearanceBankImpl::pick(std::int64_t category, std::int64_t index) const {
  const auto n = count(category);
  if (n == 0) {
    return std::nullopt;
  }
  return vectors[category][((index % n) + n) % n].clone();
}

// ---------------------------------------------------------------------------

TrainingData prepare_training_data(const TrainingConfig& config, const fs::path& run_dir) {
  SceneDatasetOptions scenes;
  fs::path cover_dir = config.data.cover_dir;
  if (config.data.annotations.empty()) {
    const auto root = run_dir / "corpus";
    if (!fs::exists(root / "instances.json")) {
      log::info("writing synthetic corpus to " + root.string());
      write_synthetic_corpus({root, config.data.synthetic_scenes, config.data.synthetic_covers, config.seed});
    }
    scenes.annotations = root / "instances.json";
    scenes.image_dir = root / "scenes";
    cover_dir = root / "covers";
  } else {
    scenes.annotations = config.data.annotations;
    scenes.image_dir = config.data.image_dir;
  }
  scenes.limit = config.data.scene_limit;
  auto dataset = ingest_scene_dataset(scenes);
  if (dataset.samples.empty()) {
    throw IoError("no usable scenes in '" + scenes.annotations.string() + "'");
  }
  TrainingData data{dataset.vocabulary, {}, ingest_book_covers(cover_dir, config.data.cover_limit)};
  if (data.covers.empty()) {
    throw IoError("no usable covers in '" + cover_dir.string() + "'");
  }
  AugmentOptions augment;
  augment.max_solids = config.data.max_solids;
  augment.relation_keep = config.data.relation_keep;
  std::mt19937_64 rng(config.seed);
  for (const auto& s : dataset.samples) {
    data.corpus.push_back(augment_sample(s, data.covers, data.vocabulary, rng, augment));
  }
  log::info("training corpus: " + std::to_string(data.corpus.size()) + " scenes, " +
            std::to_string(data.covers.size()) + " covers, " + std::to_string(data.vocabulary.size()) +
            " categories");
  return data;
}

// ---------------------------------------------------------------------------

namespace {

torch::optim::AdamOptions adam_options(const OptimizerConfig& o) {
  return torch::optim::AdamOptions(o.learning_rate).betas({o.beta1, o.beta2});
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) {
    p.set_requires_grad(on);
  }
}

double checked(std::string_view term, const torch::Tensor& value) {
  require_finite(term, value);
  return value.item<double>();
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t words[2] = {a, b};
  return fnv1a(words, sizeof words);
}

}  // namespace

std::string parameter_checksum(const torch::nn::Module& module) {
  auto h = fnv1a(nullptr, 0);
  for (const auto& item : module.named_parameters(true)) {
    auto t = item.value().detach().contiguous();
    h = fnv1a(item.key().data(), item.key().size(), h);
    h = fnv1a(t.data_ptr(), static_cast<std::size_t>(t.numel()) * t.element_size(), h);
  }
  for (const auto& item : module.named_buffers(true)) {
    auto t = item.value().detach().contiguous();
    h = fnv1a(item.key().data(), item.key().size(), h);
    h = fnv1a(t.data_ptr(), static_cast<std::size_t>(t.numel()) * t.element_size(), h);
  }
  return to_hex(h);
}

Trainer::Trainer(TrainingConfig config, CategoryVocabulary vocabulary)
    : config_(std::move(config)), vocabulary_(std::move(vocabulary)) {
  if (config_.threads > 0) {
    torch::set_num_threads(static_cast<int>(config_.threads));
  }
  torch::manual_seed(config_.seed);
  const auto categories = static_cast<std::int64_t>(vocabulary_.size());
  generator = CoverModel(config_.model, categories);
  critics = Critics(config_.model, categories);
  perception = PerceptionNet(PerceptionOptions{config_.model.perception, config_.model.perception_divisor});
  bank = AppearanceBank(categories, config_.model.appearance_dim);
  generator_optimizer = std::make_unique<torch::optim::Adam>(generator->parameters(), adam_options(config_.optimizer));
  critic_optimizer = std::make_unique<torch::optim::Adam>(critics->parameters(), adam_options(config_.optimizer));
}

StepInputs Trainer::inputs_for_step(const TrainingData& data, std::int64_t step) const {
  const auto s = static_cast<std::uint64_t>(step);
  const auto indices = batch_indices(config_.seed, s, data.corpus.size(),
                                     static_cast<std::size_t>(config_.optimizer.batch_size));
  std::mt19937_64 rng(mix(config_.seed, s));
  StepInputs in{make_batch(data.corpus, indices, data.covers, data.vocabulary, rng), {}};
  auto gen = at::detail::createCPUGenerator(mix(config_.seed ^ 0x9e3779b97f4a7c15ULL, s));
  in.noise = torch::randn({in.batch.gt_boxes.size(0), config_.model.noise_dim}, gen);
  return in;
}

struct Trainer::Fakes {
  CoverModelImpl::Output out;
  torch::Tensor appearances;
  torch::Tensor placement;  // boxes the objects were drawn at
  torch::Tensor q;
  torch::Tensor q_mismatch;
  torch::Tensor fake_crops;
};

Trainer::Fakes Trainer::forward_fakes(const StepInputs& in) {
  const auto& b = in.batch;
  Fakes f;
  f.appearances = generator->appearance->forward(b.real_crops);
  std::optional<torch::Tensor> placement;
  if (config_.ground_truth_boxes) {
    placement = b.gt_boxes;
  }
  f.out = generator->forward(b.graphs, f.appearances, in.noise, placement);
  f.placement = placement.value_or(f.out.boxes);
  {
    torch::NoGradGuard no_grad;
    auto a = f.appearances.detach();
    f.q = compose_feature_maps(b.gt_boxes, b.gt_masks, a, b.object_to_sample, b.batch_size);
    auto a_mismatch = generator->appearance->forward(b.mismatch.crops);
    f.q_mismatch =
        compose_feature_maps(b.mismatch.boxes, b.mismatch.masks, a_mismatch, b.object_to_sample, b.batch_size);
  }
  f.fake_crops = crop_boxes(f.out.image, f.placement, b.object_to_sample);
  return f;
}

std::array<double, 4> Trainer::critic_phase(const StepInputs& in) {
  const auto& b = in.batch;
  Fakes f;
  {
    torch::NoGradGuard no_grad;
    f = forward_fakes(in);
  }
  const auto& categories = b.graphs.categories;
  auto d_mask = mask_d_loss(critics->mask->forward(b.gt_masks, categories).score,
                            critics->mask->forward(f.out.masks, categories).score, config_.mask_form);
  auto d_obj = object_d_loss(critics->object->forward(b.real_crops, categories),
                             critics->object->forward(f.fake_crops, categories), b.batch_size);
  auto p_qr = critics->layout->forward(f.q, b.real_images).score;
  auto p_qi = critics->layout->forward(f.q, f.out.image).score;
  auto p_fr = critics->layout->forward(f.out.layout, b.real_images).score;
  auto p_mm = critics->layout->forward(f.q_mismatch, b.real_images).score;
  auto d_layout = layout_d_loss(p_qr, p_qi, p_fr, p_mm, config_.mismatch_sign);
  auto d_book = book_d_loss(critics->book->forward(b.book_covers), critics->book->forward(f.out.image));

  std::array<double, 4> values = {checked("d_mask", d_mask), checked("d_obj", d_obj),
                                  checked("d_layout", d_layout), checked("d_book", d_book)};
  critic_optimizer->zero_grad();
  (d_mask + d_obj + d_layout + d_book).backward();
  critic_optimizer->step();
  return values;
}

namespace {

// Score maps (one channel) are left out of feature matching: their scale
// tracks the critic's confidence and swamps the hidden layers.
std::vector<torch::Tensor> hidden_taps(const std::vector<torch::Tensor>& taps) {
  std::vector<torch::Tensor> out;
  for (const auto& t : taps) {
    if (t.size(1) != 1) {
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace

LossBundle Trainer::generator_phase(const StepInputs& in) {
  const auto& b = in.batch;
  set_requires_grad(*critics, false);
  struct Restore {
    Critics& c;
    ~Restore() { set_requires_grad(*c, true); }
  } restore{critics};

  auto f = forward_fakes(in);
  const auto& categories = b.graphs.categories;
  std::array<torch::Tensor, kLossTerms> terms;
  terms[0] = pixel_loss(f.out.image, b.real_images);
  terms[1] = box_loss(f.out.boxes, b.gt_boxes);
  {
    auto fake_features = perception->forward(f.out.image);
    std::vector<torch::Tensor> real_features;
    {
      torch::NoGradGuard no_grad;
      real_features = perception->forward(b.real_images);
    }
    terms[2] = mean_abs_over_layers(fake_features, real_features);
  }
  auto mask_fake = critics->mask->forward(f.out.masks, categories);
  terms[3] = mask_g_loss(mask_fake.score, config_.mask_form);
  terms[4] = object_g_loss(critics->object->forward(f.fake_crops, categories), b.batch_size);
  auto layout_fake = critics->layout->forward(f.out.layout, f.out.image);
  terms[5] = layout_g_loss(layout_fake.score);
  terms[6] = book_g_loss(critics->book->forward(f.out.image));
  {
    DiscriminatorOutput mask_real, layout_real;
    {
      torch::NoGradGuard no_grad;
      mask_real = critics->mask->forward(b.gt_masks, categories);
      layout_real = critics->layout->forward(f.q, b.real_images);
    }
    terms[7] = mean_abs_over_layers(hidden_taps(mask_fake.features), hidden_taps(mask_real.features));
    terms[8] = mean_abs_over_layers(hidden_taps(layout_fake.features), hidden_taps(layout_real.features));
  }

  std::array<double, kLossTerms> values{};
  for (std::size_t i = 0; i < kLossTerms; ++i) {
    values[i] = checked(kLossTermNames[i], terms[i]);
  }
  auto total = weighted_total(terms, config_.weights);
  generator_optimizer->zero_grad();
  total.backward();
  generator_optimizer->step();
  bank->push(categories, f.appearances);
  return make_bundle(values, config_.weights);
}

torch::Tensor Trainer::preview(const StepInputs& in) {
  torch::NoGradGuard no_grad;
  const auto& b = in.batch;
  std::optional<torch::Tensor> placement;
  if (config_.ground_truth_boxes) {
    placement = b.gt_boxes;
  }
  return generator->forward(b.graphs, generator->appearance->forward(b.real_crops), in.noise, placement).image;
}

LossBundle Trainer::step(const StepInputs& in) {
  const auto d = critic_phase(in);
  auto bundle = generator_phase(in);
  bundle.d_mask = d[0];
  bundle.d_obj = d[1];
  bundle.d_layout = d[2];
  bundle.d_book = d[3];
  ++iteration;
  return bundle;
}

std::string Trainer::generator_checksum() const {
  return parameter_checksum(*generator) + parameter_checksum(*bank);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointFormat = 1;

template <typename T>
void save_blob(const T& value, const fs::path& path) {
  try {
    torch::save(value, path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write '" + path.string() + "': " + e.what_without_backtrace());
  }
}

template <typename T>
void load_blob(T& value, const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError("checkpoint blob '" + path.string() + "' is missing");
  }
  try {
    torch::load(value, path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read '" + path.string() + "': " + e.what_without_backtrace());
  }
}

}  // namespace

void Trainer::save(const fs::path& dir) const {
  fs::create_directories(dir);
  save_blob(generator, dir / "generator.v1.pt");
  save_blob(critics, dir / "critics.v1.pt");
  save_blob(bank, dir / "appearance_bank.v1.pt");
  save_blob(*generator_optimizer, dir / "generator_optimizer.v1.pt");
  save_blob(*critic_optimizer, dir / "critic_optimizer.v1.pt");
  nlohmann::ordered_json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["iteration"] = iteration;
  manifest["config_hash"] = config_hash(config_);
  manifest["generator_checksum"] = generator_checksum();
  manifest["config"] = config_to_json(config_);
  manifest["vocabulary"] = vocabulary_.entries();
  manifest["networks"] = {{"generator", "generator.v1.pt"},
                          {"critics", "critics.v1.pt"},
                          {"appearance_bank", "appearance_bank.v1.pt"},
                          {"generator_optimizer", "generator_optimizer.v1.pt"},
                          {"critic_optimizer", "critic_optimizer.v1.pt"}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) {
    throw IoError("cannot write manifest in '" + dir.string() + "'");
  }
}

Trainer Trainer::load(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw IoError("no manifest.json in checkpoint '" + dir.string() + "'");
  }
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("checkpoint manifest does not parse: " + std::string(e.what()));
  }
  if (manifest.value("format", 0) != kCheckpointFormat) {
    throw IoError("unsupported checkpoint format in '" + dir.string() + "'");
  }
  auto config = config_from_json(manifest.at("config"));
  if (config_hash(config) != manifest.value("config_hash", std::string{})) {
    throw IoError("checkpoint config hash does not match its config");
  }
  // The stored entries already include the reserved categories at the end.
  Trainer t(config, CategoryVocabulary(manifest.at("vocabulary").get<std::vector<std::string>>()));
  load_blob(t.generator, dir / "generator.v1.pt");
  load_blob(t.critics, dir / "critics.v1.pt");
  load_blob(t.bank, dir / "appearance_bank.v1.pt");
  load_blob(*t.generator_optimizer, dir / "generator_optimizer.v1.pt");
  load_blob(*t.critic_optimizer, dir / "critic_optimizer.v1.pt");
  t.iteration = manifest.at("iteration").get<std::int64_t>();
  return t;
}

// ---------------------------------------------------------------------------

std::string loss_csv_header() {
  std::string h = "step";
  for (auto name : kLossTermNames) {
    h += ",";
    h += name;
  }
  return h + ",total,d_mask,d_obj,d_layout,d_book";
}

std::string loss_csv_row(std::int64_t step, const LossBundle& b) {
  std::string row = std::to_string(step);
  char buf[64];
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    row += buf;
  };
  for (double t : b.terms) {
    add(t);
  }
  add(b.total);
  add(b.d_mask);
  add(b.d_obj);
  add(b.d_layout);
  add(b.d_book);
  return row;
}

namespace {

void write_samples(const fs::path& path, const torch::Tensor& real, const torch::Tensor& fake) {
  fs::create_directories(path.parent_path());
  auto row = [](const torch::Tensor& images) {
    std::vector<cv::Mat> tiles;
    for (std::int64_t i = 0; i < images.size(0); ++i) {
      tiles.push_back(tensor_to_rgb8(images[i]));
    }
    cv::Mat out;
    cv::hconcat(tiles, out);
    return out;
  };
  cv::Mat grid;
  cv::vconcat(row(real), row(fake), grid);
  write_png(path, grid);
}

}  // namespace

fs::path run_training(const TrainingConfig& config, const RunOptions& options) {
  fs::create_directories(options.run_dir);
  auto data = prepare_training_data(config, options.run_dir);
  std::optional<Trainer> trainer;
  if (options.resume) {
    trainer.emplace(Trainer::load(*options.resume));
    if (!(trainer->vocabulary() == data.vocabulary)) {
      throw ConfigError("checkpoint vocabulary differs from the training data");
    }
    log::info("resuming at iteration " + std::to_string(trainer->iteration));
  } else {
    trainer.emplace(config, data.vocabulary);
  }
  const auto csv_path = options.run_dir / "losses.csv";
  const bool fresh = !fs::exists(csv_path);
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) {
    throw IoError("cannot open '" + csv_path.string() + "'");
  }
  if (fresh) {
    csv << loss_csv_header() << "\n";
  }
  auto end = trainer->config().iterations;
  if (options.max_steps) {
    end = std::min(end, trainer->iteration + *options.max_steps);
  }
  fs::path last;
  while (trainer->iteration < end) {
    const auto step = trainer->iteration;
    const auto inputs = trainer->inputs_for_step(data, step);
    auto bundle = trainer->step(inputs);
    if (options.sample_every > 0 && trainer->iteration % options.sample_every == 0) {
      write_samples(options.run_dir / "samples" / ("step-" + std::to_string(trainer->iteration) + ".png"),
                    inputs.batch.real_images, trainer->preview(inputs));
    }
    csv << loss_csv_row(step, bundle) << "\n" << std::flush;
    if (options.on_step) {
      options.on_step(step, bundle);
    }
    if (trainer->iteration % trainer->config().checkpoint_every == 0 || trainer->iteration == end) {
      last = options.run_dir / ("checkpoint-" + std::to_string(trainer->iteration));
      trainer->save(last);
      log::info("checkpoint " + last.string());
    }
  }
  return last;
}

}  // namespace covergraph
