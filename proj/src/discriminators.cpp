#include "covergraph/discriminators.hpp"

#include "covergraph/errors.hpp"
#include "covergraph/object_synthesis.hpp"

namespace covergraph {

namespace {

torch::nn::LeakyReLU lrelu() { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); }

torch::nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

torch::nn::InstanceNorm2d inorm(std::int64_t c) {
  return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(c).affine(true));
}

// conv (+ norm) + activation, one feature-matching tap per block.
torch::nn::Sequential block(torch::nn::Conv2d c, std::optional<std::int64_t> norm_channels, bool activate) {
  torch::nn::Sequential s(c);
  if (norm_channels) {
    s->push_back(inorm(*norm_channels));
  }
  if (activate) {
    s->push_back(lrelu());
  }
  return s;
}

torch::nn::ModuleList layout_stream(std::int64_t in, std::int64_t b) {
  torch::nn::ModuleList list;
  list->push_back(block(conv(in, b, 4, 2, 1), std::nullopt, true));
  list->push_back(block(conv(b, 2 * b, 4, 2, 1), 2 * b, true));
  list->push_back(block(conv(2 * b, 4 * b, 4, 2, 1), 4 * b, true));
  list->push_back(block(conv(4 * b, 8 * b, 4, 2, 1), 8 * b, true));
  list->push_back(block(conv(8 * b, 1, 4, 2, 1), std::nullopt, false));
  return list;
}

torch::Tensor run_stream(torch::nn::ModuleList& stream, torch::Tensor x, std::vector<torch::Tensor>& taps) {
  for (const auto& layer : *stream) {
    x = layer->as<torch::nn::Sequential>()->forward(x);
    taps.push_back(x);
  }
  return x;
}

}  // namespace

torch::Tensor clamp_probability(const torch::Tensor& p) {
  return p.clamp(kProbabilityFloor, 1.0 - kProbabilityFloor);
}

MaskDiscriminatorImpl::MaskDiscriminatorImpl(const MaskDiscriminatorOptions& options) : options_(options) {
  if (options.num_categories <= 0) {
    throw ConfigError("mask discriminator needs at least one category");
  }
  const auto b = options.base_channels;
  category_table = register_module("category_table", torch::nn::Embedding(options.num_categories, options.embedding_dim));
  layers = register_module("layers", torch::nn::ModuleList());
  layers->push_back(block(conv(1 + options.embedding_dim, b, 3, 2, 1), b, true));
  layers->push_back(block(conv(b, 2 * b, 3, 2, 1), 2 * b, true));
  layers->push_back(block(conv(2 * b, 4 * b, 3, 1, 1), 4 * b, true));
  layers->push_back(block(conv(4 * b, 1, 3, 1, 1), std::nullopt, true));
  pool = register_module("pool", torch::nn::AvgPool2d(torch::nn::AvgPool2dOptions(3).stride(2)));
}

DiscriminatorOutput MaskDiscriminatorImpl::forward(const torch::Tensor& masks, const torch::Tensor& categories) {
  if (masks.dim() != 3 || masks.size(1) != kMaskSize || masks.size(2) != kMaskSize) {
    throw ShapeError("mask discriminator expects [N, 32, 32] masks, got " + c10::str(masks.sizes()));
  }
  if (categories.dim() != 1 || categories.size(0) != masks.size(0)) {
    throw ShapeError("mask discriminator needs one category per mask");
  }
  const auto n = masks.size(0);
  auto cond = category_table->forward(categories).view({n, options_.embedding_dim, 1, 1}).expand(
      {n, options_.embedding_dim, kMaskSize, kMaskSize});
  auto x = torch::cat({masks.unsqueeze(1), cond}, 1);
  DiscriminatorOutput out;
  for (const auto& layer : *layers) {
    x = layer->as<torch::nn::Sequential>()->forward(x);
    out.features.push_back(x);
  }
  out.score = pool->forward(x);
  return out;
}

LayoutDiscriminatorImpl::LayoutDiscriminatorImpl(const LayoutDiscriminatorOptions& options) : options_(options) {
  const auto in = options.layout_channels + 3;
  full_scale = register_module("full_scale", layout_stream(in, options.base_channels));
  half_scale = register_module("half_scale", layout_stream(in, options.base_channels));
  downsample = register_module(
      "downsample", torch::nn::AvgPool2d(torch::nn::AvgPool2dOptions(3).stride(2).padding(1).count_include_pad(false)));
}

DiscriminatorOutput LayoutDiscriminatorImpl::forward(const torch::Tensor& layout, const torch::Tensor& image) {
  if (layout.dim() != 4 || layout.size(1) != options_.layout_channels) {
    throw ShapeError("layout discriminator expects [B, " + std::to_string(options_.layout_channels) +
                     ", H, W] layouts, got " + c10::str(layout.sizes()));
  }
  if (image.dim() != 4 || image.size(1) != 3 || image.size(0) != layout.size(0) ||
      image.size(2) != layout.size(2) || image.size(3) != layout.size(3)) {
    throw ShapeError("layout discriminator image must be [B, 3, H, W] matching the layout");
  }
  auto x = torch::cat({layout, image}, 1);
  DiscriminatorOutput out;
  auto a = run_stream(full_scale, x, out.features);
  auto b = run_stream(half_scale, downsample->forward(x), out.features);
  const auto n = x.size(0);
  auto logit = 0.5 * (a.view({n, -1}).mean(1) + b.view({n, -1}).mean(1));
  out.score = clamp_probability(torch::sigmoid(logit));
  return out;
}

BookDiscriminatorImpl::BookDiscriminatorImpl(const BookDiscriminatorOptions& options) {
  const auto b = options.base_channels;
  auto bn = [](std::int64_t c) { return torch::nn::BatchNorm2d(c); };
  layers = register_module(
      "layers", torch::nn::Sequential(conv(3, b, 4, 2, 1), lrelu(),                          //
                                      conv(b, 2 * b, 4, 2, 1), bn(2 * b), lrelu(),           //
                                      conv(2 * b, 4 * b, 4, 2, 1), bn(4 * b), lrelu(),       //
                                      conv(4 * b, 8 * b, 4, 2, 1), bn(8 * b), lrelu(),       //
                                      conv(8 * b, 8 * b, 4, 2, 1), bn(8 * b), lrelu(),       //
                                      conv(8 * b, 1, 4, 2, 1)));
}

torch::Tensor BookDiscriminatorImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw ShapeError("book discriminator expects [B, 3, H, W] images");
  }
  auto logits = layers->forward(images);
  return clamp_probability(torch::sigmoid(logits).view({images.size(0), -1}).mean(1));
}

ObjectDiscriminatorImpl::ObjectDiscriminatorImpl(const ObjectDiscriminatorOptions& options) {
  if (options.num_categories <= 0) {
    throw ConfigError("object discriminator needs at least one category");
  }
  const auto b = options.base_channels;
  features = register_module(
      "features",
      torch::nn::Sequential(conv(3, b, 4, 2, 1), lrelu(), conv(b, 2 * b, 4, 2, 1), torch::nn::BatchNorm2d(2 * b),
                            lrelu(), conv(2 * b, 4 * b, 4, 2, 1), torch::nn::BatchNorm2d(4 * b), lrelu(),
                            torch::nn::AdaptiveAvgPool2d(torch::nn::AdaptiveAvgPool2dOptions(1)),
                            torch::nn::Flatten()));
  hidden = register_module("hidden", torch::nn::Linear(4 * b, options.hidden_dim));
  head = register_module("head", torch::nn::Linear(options.hidden_dim, options.num_categories));
}

torch::Tensor ObjectDiscriminatorImpl::logits(const torch::Tensor& crops) {
  if (crops.dim() != 4 || crops.size(1) != 3 || crops.size(2) != kCropSize || crops.size(3) != kCropSize) {
    throw ShapeError("object discriminator expects [N, 3, 64, 64] crops, got " + c10::str(crops.sizes()));
  }
  return head->forward(hidden->forward(features->forward(crops)));
}

torch::Tensor ObjectDiscriminatorImpl::forward(const torch::Tensor& crops, const torch::Tensor& categories) {
  auto all = logits(crops);
  auto picked = all.gather(1, categories.view({-1, 1}).to(torch::kInt64)).squeeze(1);
  return clamp_probability(torch::sigmoid(picked));
}

}  // namespace covergraph
