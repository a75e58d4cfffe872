#pragma once

#include <torch/torch.h>

#include <vector>

namespace covergraph {

struct CoverGeneratorOptions {
  std::int64_t input_channels = 65;
  std::int64_t base_channels = 64;
  std::int64_t residual_blocks = 10;
  std::int64_t downsamplings = 4;

  std::int64_t bottleneck_channels() const { return base_channels << downsamplings; }
};

/// conv-norm-relu-conv-norm with an identity skip; channel count is kept.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential branch{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Layout feature map -> RGB cover in [-1, 1].
///
/// Contracting path: 7x7 conv at full resolution, then stride-2 3x3 convs
/// doubling channels each time. Then a stack of residual blocks at the
/// bottleneck, and transposed 3x3 convs back up, finishing with a 7x7 conv
/// to three channels and tanh. Instance norm everywhere except the output;
/// 7x7 layers use reflection padding, the rest zero padding.
class CoverGeneratorImpl : public torch::nn::Module {
 public:
  explicit CoverGeneratorImpl(const CoverGeneratorOptions& options);

  torch::Tensor encode(const torch::Tensor& features);
  torch::Tensor forward(const torch::Tensor& features);
  /// Spatial size and channels after every stage, for shape bookkeeping.
  std::vector<std::vector<std::int64_t>> trace_shapes(const torch::Tensor& features);

  const CoverGeneratorOptions& options() const { return options_; }

  torch::nn::Sequential contracting{nullptr};
  torch::nn::ModuleList residual{nullptr};
  torch::nn::Sequential expanding{nullptr};
  torch::nn::Sequential output{nullptr};

 private:
  void check_input(const torch::Tensor& features) const;

  CoverGeneratorOptions options_;
};
TORCH_MODULE(CoverGenerator);

}  // namespace covergraph
