#pragma once

#include <opencv2/core.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "covergraph/config.hpp"
#include "covergraph/graph_model.hpp"
#include "covergraph/title_styling.hpp"
#include "covergraph/training.hpp"

namespace covergraph {

/// Read-only generator state restored from a checkpoint. Safe to share
/// between threads: nothing here is written after loading.
struct InferenceModel {
  TrainingConfig config;
  CategoryVocabulary vocabulary;
  CoverModel generator{nullptr};
  AppearanceBank bank{nullptr};
  std::int64_t iteration = 0;

  std::string checksum() const;
};

std::shared_ptr<const InferenceModel> load_inference_model(const std::filesystem::path& checkpoint);
/// Wraps a trainer's current weights (copied) for generation.
std::shared_ptr<const InferenceModel> inference_model_from(const Trainer& trainer);

inline constexpr int kMaxVariations = 16;

struct GenerationRequest {
  LayoutGraph graph;
  std::uint64_t seed = 0;
  // Per-object mask-noise seeds, by object id.
  std::map<std::string, std::uint64_t> noise_seeds;
  // Replaces the title object's text when set.
  std::optional<std::string> title_text;
  int variations = 1;
};

struct GeneratedObject {
  std::string id;
  BoundingBox box;
};

struct GenerationResult {
  std::vector<cv::Mat> images;  // 8-bit RGB, 128x128, one per variation
  std::vector<GeneratedObject> objects;  // predicted boxes (shared by all variations)
  std::vector<std::string> warnings;
  std::vector<std::string> title_backends;  // backend used per variation, empty without a title
  double network_ms = 0.0;
  double title_ms = 0.0;
};

/// Throws ValidationError (with the report) for graphs the model cannot
/// take and for variation counts outside 1..16.
void check_request(const InferenceModel& model, const GenerationRequest& request);

/// Deterministic in (weights, request). Variation v draws fresh mask noise
/// and fresh appearances for objects in random mode; seeded and explicit
/// appearances are shared across variations.
GenerationResult generate_covers(const InferenceModel& model, const GenerationRequest& request,
                                 const TitleBackend& backend);

}  // namespace covergraph
