#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

namespace covergraph {

struct PerceptionOptions {
  // "random:<seed>" builds a frozen randomly initialised extractor;
  // anything else is a path to a state dict of VGG16 `features.N.weight` /
  // `features.N.bias` tensors written by tools/export_vgg16.py.
  std::string source = "random:0";
  // Channel divisor for desk-scale profiles. Must be 1 for pretrained weights.
  std::int64_t width_divisor = 1;
};

/// Frozen VGG16 trunk up to the fourth pooling stage. Returns the activation
/// after each pooling layer. Inputs are images in [-1, 1].
class PerceptionNetImpl : public torch::nn::Module {
 public:
  explicit PerceptionNetImpl(const PerceptionOptions& options);
  std::vector<torch::Tensor> forward(const torch::Tensor& images);

  torch::nn::Sequential features{nullptr};

 private:
  void load_state(const std::string& path);

  std::vector<std::int64_t> tap_after_;
  torch::Tensor mean_;
  torch::Tensor std_;
};
TORCH_MODULE(PerceptionNet);

}  // namespace covergraph
