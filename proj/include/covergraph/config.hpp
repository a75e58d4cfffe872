#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "covergraph/losses.hpp"

namespace covergraph {

struct ModelConfig {
  std::int64_t appearance_dim = 64;
  std::int64_t embedding_dim = 128;
  std::int64_t gcn_hidden = 512;
  std::int64_t gcn_candidate = 384;
  std::int64_t box_hidden = 512;
  std::int64_t mask_channels = 192;
  std::int64_t noise_dim = 64;
  std::int64_t appearance_channels = 64;
  std::int64_t appearance_hidden = 192;
  std::int64_t generator_channels = 64;
  std::int64_t residual_blocks = 10;
  std::int64_t mask_critic_channels = 64;
  std::int64_t layout_critic_channels = 64;
  std::int64_t book_critic_channels = 64;
  std::int64_t object_critic_channels = 64;
  std::int64_t object_critic_hidden = 1024;
  std::string perception = "random:0";
  std::int64_t perception_divisor = 1;
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::int64_t batch_size = 6;
};

struct DataConfig {
  // Empty annotations means: write a synthetic corpus under the run directory.
  std::filesystem::path annotations;
  std::filesystem::path image_dir;
  std::filesystem::path cover_dir;
  std::size_t scene_limit = 0;
  std::size_t cover_limit = 0;
  std::size_t synthetic_scenes = 10;
  std::size_t synthetic_covers = 12;
  int max_solids = 2;
  double relation_keep = 0.5;
};

struct TrainingConfig {
  std::string profile = "full";
  ModelConfig model;
  OptimizerConfig optimizer;
  DataConfig data;
  LossWeights weights;
  std::int64_t iterations = 100000;
  std::int64_t checkpoint_every = 5000;
  std::uint64_t seed = 0;
  MaskGanForm mask_form = MaskGanForm::least_squares;
  MismatchSign mismatch_sign = MismatchSign::as_written;
  bool ground_truth_boxes = false;
  std::int64_t threads = 0;  // 0 leaves the torch default
};

/// Named presets: "full", "overfit10", "smoke500". ConfigError otherwise.
TrainingConfig profile_config(const std::string& name);

/// Reads a JSON config. A "profile" key picks the base preset; every other
/// key overrides it. Unknown keys are a ConfigError.
TrainingConfig load_config(const std::filesystem::path& path);
TrainingConfig config_from_json(const nlohmann::json& document);
nlohmann::ordered_json config_to_json(const TrainingConfig& config);
/// Hex digest of the canonical JSON form.
std::string config_hash(const TrainingConfig& config);

}  // namespace covergraph
