#pragma once

#include <torch/torch.h>

#include <vector>

namespace covergraph {

// Sigmoid outputs are kept away from 0 and 1 so logs stay finite.
constexpr double kProbabilityFloor = 1e-6;
torch::Tensor clamp_probability(const torch::Tensor& p);

/// Score plus the intermediate activations used for feature matching.
struct DiscriminatorOutput {
  torch::Tensor score;
  std::vector<torch::Tensor> features;
};

struct MaskDiscriminatorOptions {
  std::int64_t num_categories = 0;
  std::int64_t embedding_dim = 16;
  std::int64_t base_channels = 64;
};

/// Conditional patch critic over 32x32 masks. The category embedding is
/// broadcast over the grid and stacked with the mask channel.
/// `score` is the raw (least-squares) patch map [N, 1, 3, 3].
class MaskDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit MaskDiscriminatorImpl(const MaskDiscriminatorOptions& options);
  DiscriminatorOutput forward(const torch::Tensor& masks, const torch::Tensor& categories);

  torch::nn::Embedding category_table{nullptr};
  torch::nn::ModuleList layers{nullptr};
  torch::nn::AvgPool2d pool{nullptr};

 private:
  MaskDiscriminatorOptions options_;
};
TORCH_MODULE(MaskDiscriminator);

struct LayoutDiscriminatorOptions {
  std::int64_t layout_channels = 65;
  std::int64_t base_channels = 64;
};

/// Two-scale critic on (layout map, image) pairs. The second stream sees a
/// 2x average-pooled copy of the input. `score` is a probability per sample.
class LayoutDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit LayoutDiscriminatorImpl(const LayoutDiscriminatorOptions& options);
  DiscriminatorOutput forward(const torch::Tensor& layout, const torch::Tensor& image);

  torch::nn::ModuleList full_scale{nullptr};
  torch::nn::ModuleList half_scale{nullptr};
  torch::nn::AvgPool2d downsample{nullptr};

 private:
  LayoutDiscriminatorOptions options_;
};
TORCH_MODULE(LayoutDiscriminator);

struct BookDiscriminatorOptions {
  std::int64_t base_channels = 64;
};

/// Unconditional critic on whole covers; probability per sample.
class BookDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit BookDiscriminatorImpl(const BookDiscriminatorOptions& options);
  torch::Tensor forward(const torch::Tensor& images);

  torch::nn::Sequential layers{nullptr};
};
TORCH_MODULE(BookDiscriminator);

struct ObjectDiscriminatorOptions {
  std::int64_t num_categories = 0;
  std::int64_t base_channels = 64;
  std::int64_t hidden_dim = 1024;
};

/// Per-category real/fake head on 64x64 crops.
class ObjectDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit ObjectDiscriminatorImpl(const ObjectDiscriminatorOptions& options);
  /// Raw per-category logits [N, num_categories].
  torch::Tensor logits(const torch::Tensor& crops);
  /// Probability that each crop is a real instance of its category [N].
  torch::Tensor forward(const torch::Tensor& crops, const torch::Tensor& categories);

  torch::nn::Sequential features{nullptr};
  torch::nn::Linear hidden{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(ObjectDiscriminator);

}  // namespace covergraph
