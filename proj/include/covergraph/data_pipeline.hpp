#pragma once

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "covergraph/graph_encoder.hpp"
#include "covergraph/graph_model.hpp"
#include "covergraph/object_synthesis.hpp"
#include "covergraph/title_styling.hpp"

namespace covergraph {

struct SceneObject {
  std::int64_t category = 0;  // vocabulary id
  BoundingBox box;
  torch::Tensor mask;  // [32, 32] float, exactly 0 or 1
  torch::Tensor crop;  // [3, 64, 64] in [-1, 1], cut from the 128x128 image
};

struct SceneSample {
  std::string name;
  torch::Tensor image;  // [3, 128, 128] in [-1, 1]
  std::vector<SceneObject> objects;
};

struct SceneDatasetOptions {
  std::filesystem::path annotations;  // COCO-format instances document
  std::filesystem::path image_dir;
  std::size_t limit = 0;  // 0 = no limit
  double min_area_fraction = 0.02;
  std::size_t max_objects = 8;
  double max_skip_rate = 0.10;
};

struct SceneDataset {
  CategoryVocabulary vocabulary;
  std::vector<SceneSample> samples;
  std::size_t skipped = 0;
};

/// Loads polygon instances, rasterises them at source resolution, drops
/// crowd/RLE and undersized instances, and resizes everything to 128x128.
/// Images are visited in ascending id order. Unreadable images or broken
/// annotations skip their sample with a log line; IoError when more than
/// `max_skip_rate` of the visited images are skipped.
SceneDataset ingest_scene_dataset(const SceneDatasetOptions& options);

/// Sorted directory scan of cover images, plain-resized to 128x128 and
/// mapped to [-1, 1]. Unreadable files are skipped with a log line.
std::vector<torch::Tensor> ingest_book_covers(const std::filesystem::path& dir, std::size_t limit = 0);

/// Binary 32x32 mask of a polygon set drawn at source resolution, sampled
/// over the box footprint.
torch::Tensor rasterize_mask(const std::vector<std::vector<cv::Point2f>>& polygons, cv::Size source,
                             const BoundingBox& box);

/// Grid cell of the box centre and size level ceil(10 * sqrt(area)).
LocationVector location_from_box(const BoundingBox& box);
/// Geometric relation of `a` with respect to `b`.
Predicate relation_from_boxes(const BoundingBox& a, const BoundingBox& b);

struct TitleAnnotation {
  BoundingBox box;
  std::size_t font = 0;
  Rgb color;
  std::string text;
};

struct AugmentedSample {
  SceneSample scene;  // image and objects include solids and the title
  LayoutGraph graph;  // objects in the same order as scene.objects
  TitleAnnotation title;
};

struct AugmentOptions {
  int max_solids = 2;
  // Upper bound on the per-channel std (in [-1, 1] units) of a solid patch.
  double solid_std_threshold = 0.08;
  int solid_window_attempts = 24;
  // Each derived relation survives with this probability, so training
  // graphs are as sparse as hand-drawn ones.
  double relation_keep = 1.0;
};

/// Adds 0..max_solids solid regions cut from real covers and exactly one
/// placeholder title, then derives the layout graph from geometry.
AugmentedSample augment_sample(const SceneSample& sample, const std::vector<torch::Tensor>& covers,
                               const CategoryVocabulary& vocabulary, std::mt19937_64& rng,
                               const AugmentOptions& options = {});
/// Most uniform window found in a random cover, [3, h, w].
torch::Tensor cut_solid_patch(const std::vector<torch::Tensor>& covers, std::mt19937_64& rng, int attempts,
                              int min_side, int max_side);
/// Derives a graph whose objects mirror `objects` (ids "o0", "o1", ...).
LayoutGraph graph_from_objects(const std::vector<SceneObject>& objects, const CategoryVocabulary& vocabulary,
                               const std::optional<std::string>& title_text);

/// Per-object attributes used for a layout map.
struct ObjectAttributes {
  torch::Tensor boxes;  // [O, 4]
  torch::Tensor masks;  // [O, 32, 32]
  torch::Tensor crops;  // [O, 3, 64, 64]
};

ObjectAttributes attributes_of(const std::vector<SceneObject>& objects);

/// Donor attributes for the mismatched map Q'. Each object takes the box,
/// mask and crop of a same-category object from another sample whose
/// category multiset matches; failing that, of an object in another sample
/// of the batch (same category preferred); failing that (batch of one), its
/// own attributes mirrored horizontally.
ObjectAttributes mismatched_attributes(const std::vector<AugmentedSample>& corpus,
                                       const std::vector<std::size_t>& batch, std::mt19937_64& rng);

/// Everything one optimisation step needs.
struct TrainingBatch {
  GraphTensors graphs;
  torch::Tensor real_images;       // R  [B, 3, 128, 128]
  torch::Tensor gt_boxes;          // [O, 4]
  torch::Tensor gt_masks;          // [O, 32, 32]
  torch::Tensor real_crops;        // r_o [O, 3, 64, 64]
  torch::Tensor object_to_sample;  // [O]
  ObjectAttributes mismatch;       // Q' attributes aligned with objects
  torch::Tensor book_covers;       // B  [B, 3, 128, 128]
  std::int64_t batch_size = 0;
};

TrainingBatch make_batch(const std::vector<AugmentedSample>& corpus, const std::vector<std::size_t>& indices,
                         const std::vector<torch::Tensor>& covers, const CategoryVocabulary& vocabulary,
                         std::mt19937_64& rng);

/// Sample indices for a step: a pure function of (seed, step).
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t corpus_size,
                                       std::size_t batch_size);

struct SyntheticCorpusOptions {
  std::filesystem::path root;
  std::size_t scenes = 10;
  std::size_t covers = 12;
  std::uint64_t seed = 0;
};

/// Writes a small COCO-format scene set (root/scenes, root/instances.json)
/// and a cover directory (root/covers) of procedurally drawn images.
void write_synthetic_corpus(const SyntheticCorpusOptions& options);

}  // namespace covergraph
