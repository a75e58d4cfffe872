#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covergraph/config.hpp"
#include "covergraph/cover_synthesis.hpp"
#include "covergraph/data_pipeline.hpp"
#include "covergraph/discriminators.hpp"
#include "covergraph/graph_encoder.hpp"
#include "covergraph/losses.hpp"
#include "covergraph/object_synthesis.hpp"
#include "covergraph/perception.hpp"

namespace covergraph {

/// Everything that produces an image from a graph: GCN, box and mask heads,
/// appearance encoder and the cover generator.
class CoverModelImpl : public torch::nn::Module {
 public:
  CoverModelImpl(const ModelConfig& config, std::int64_t num_categories);

  struct Output {
    torch::Tensor embeddings;  // [O, 128]
    torch::Tensor boxes;       // predicted [O, 4]
    torch::Tensor masks;       // [O, 32, 32]
    torch::Tensor layout;      // F [B, D + 1, 128, 128]
    torch::Tensor image;       // I [B, 3, 128, 128]
  };

  /// `placement_boxes` overrides the predicted boxes in the layout map when
  /// given (ground-truth box training).
  Output forward(const GraphTensors& graphs, const torch::Tensor& appearances, const torch::Tensor& noise,
                 const std::optional<torch::Tensor>& placement_boxes = std::nullopt);

  GraphEncoder encoder{nullptr};
  BoxRegressor box_head{nullptr};
  MaskGenerator mask_head{nullptr};
  AppearanceEncoder appearance{nullptr};
  CoverGenerator cover{nullptr};
};
TORCH_MODULE(CoverModel);

class CriticsImpl : public torch::nn::Module {
 public:
  CriticsImpl(const ModelConfig& config, std::int64_t num_categories);

  MaskDiscriminator mask{nullptr};
  LayoutDiscriminator layout{nullptr};
  BookDiscriminator book{nullptr};
  ObjectDiscriminator object{nullptr};
};
TORCH_MODULE(Critics);

/// Recent appearance vectors per category, filled during training and used
/// to pick appearances at inference.
class AppearanceBankImpl : public torch::nn::Module {
 public:
  AppearanceBankImpl(std::int64_t num_categories, std::int64_t dim, std::int64_t capacity = 32);
  void push(const torch::Tensor& categories, const torch::Tensor& vectors);
  std::int64_t count(std::int64_t category) const;
  /// Entry `index mod count`; nullopt when the category was never seen.
  std::optional<torch::Tensor> pick(std::int64_t category, std::int64_t index) const;

  torch::Tensor vectors;  // [C, capacity, D]
  torch::Tensor counts;   // [C]
  torch::Tensor cursor;   // [C]
};
TORCH_MODULE(AppearanceBank);

struct TrainingData {
  CategoryVocabulary vocabulary;
  std::vector<AugmentedSample> corpus;
  std::vector<torch::Tensor> covers;
};

/// Ingests (or synthesises under `run_dir/corpus`) the scene and cover sets
/// and augments every scene once, deterministically in the config seed.
TrainingData prepare_training_data(const TrainingConfig& config, const std::filesystem::path& run_dir);

/// Noise and data for one step are pure functions of (seed, step).
struct StepInputs {
  TrainingBatch batch;
  torch::Tensor noise;  // [O, noise_dim]
};

class Trainer {
 public:
  Trainer(TrainingConfig config, CategoryVocabulary vocabulary);

  StepInputs inputs_for_step(const TrainingData& data, std::int64_t step) const;

  /// Critic update on detached fakes. Returns (d_mask, d_obj, d_layout, d_book).
  std::array<double, 4> critic_phase(const StepInputs& in);
  /// Generator update; fills the nine terms and the total.
  LossBundle generator_phase(const StepInputs& in);
  /// One critic update then one generator update; advances `iteration`.
  LossBundle step(const StepInputs& in);

  /// Generated images for the step's batch without touching any state.
  torch::Tensor preview(const StepInputs& in);

  /// Writes `<dir>/manifest.json` and one `*.v1.pt` blob per network and
  /// optimiser.
  void save(const std::filesystem::path& dir) const;
  static Trainer load(const std::filesystem::path& dir);

  /// Digest of the generator weights and the appearance bank.
  std::string generator_checksum() const;

  const TrainingConfig& config() const { return config_; }
  const CategoryVocabulary& vocabulary() const { return vocabulary_; }

  CoverModel generator{nullptr};
  Critics critics{nullptr};
  PerceptionNet perception{nullptr};
  AppearanceBank bank{nullptr};
  std::unique_ptr<torch::optim::Adam> generator_optimizer;
  std::unique_ptr<torch::optim::Adam> critic_optimizer;
  std::int64_t iteration = 0;

 private:
  struct Fakes;
  Fakes forward_fakes(const StepInputs& in);

  TrainingConfig config_;
  CategoryVocabulary vocabulary_;
};

/// Checksum over a module's parameters and buffers.
std::string parameter_checksum(const torch::nn::Module& module);

struct RunOptions {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> resume;  // checkpoint directory
  std::optional<std::int64_t> max_steps;       // stop early (tests)
  std::function<void(std::int64_t, const LossBundle&)> on_step;
  // Every n steps, `run_dir/samples/step-<n>.png`: real row over generated row.
  std::int64_t sample_every = 0;
};

/// Full loop: data, `losses.csv` (step, nine terms, total, critic terms),
/// checkpoints under `run_dir/checkpoint-<iteration>`. Returns the path of
/// the last checkpoint written.
std::filesystem::path run_training(const TrainingConfig& config, const RunOptions& options);

/// The CSV header used by run_training.
std::string loss_csv_header();
std::string loss_csv_row(std::int64_t step, const LossBundle& bundle);

}  // namespace covergraph
