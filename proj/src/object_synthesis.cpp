#include "covergraph/object_synthesis.hpp"

#include "covergraph/log.hpp"

#include <algorithm>
#include <cmath>

#include "covergraph/errors.hpp"

namespace covergraph {

namespace F = torch::nn::functional;

namespace {

constexpr double kMinExtent = 1e-6;

std::int64_t round_to_pixel(double coord, std::int64_t canvas) {
  const auto px = std::lround(coord * static_cast<double>(canvas));
  return std::clamp<std::int64_t>(px, 0, canvas);
}

}  // namespace

PixelRect to_pixel_rect(const BoundingBox& box, std::int64_t canvas) {
  return {round_to_pixel(box.x0, canvas), round_to_pixel(box.y0, canvas), round_to_pixel(box.x1, canvas),
          round_to_pixel(box.y1, canvas)};
}

BoundingBox box_from_tensor(const torch::Tensor& row) {
  auto values = row.detach().to(torch::kFloat64).contiguous();
  auto acc = values.accessor<double, 1>();
  return {acc[0], acc[1], acc[2], acc[3]};
}

torch::Tensor box_to_tensor(const BoundingBox& box) {
  return torch::tensor({static_cast<float>(box.x0), static_cast<float>(box.y0), static_cast<float>(box.x1),
                        static_cast<float>(box.y1)});
}

torch::Tensor normalize_boxes(const torch::Tensor& values) {
  auto v = values.clamp(0.0, 1.0);
  auto x_lo = torch::minimum(v.select(1, 0), v.select(1, 2));
  auto x_hi = torch::maximum(v.select(1, 0), v.select(1, 2));
  auto y_lo = torch::minimum(v.select(1, 1), v.select(1, 3));
  auto y_hi = torch::maximum(v.select(1, 1), v.select(1, 3));
  x_hi = torch::maximum(x_hi, x_lo + kMinExtent).clamp_max(1.0);
  x_lo = torch::minimum(x_lo, x_hi - kMinExtent);
  y_hi = torch::maximum(y_hi, y_lo + kMinExtent).clamp_max(1.0);
  y_lo = torch::minimum(y_lo, y_hi - kMinExtent);
  return torch::stack({x_lo, y_lo, x_hi, y_hi}, 1);
}

// ---------------------------------------------------------------------------

BoxRegressorImpl::BoxRegressorImpl(const BoxRegressorOptions& options) {
  hidden = register_module("hidden", torch::nn::Linear(options.embedding_dim, options.hidden_dim));
  output = register_module("output", torch::nn::Linear(options.hidden_dim, 4));
  // Start from a broad centred box. With a zero bias every box sits at 0.5
  // and rounds to nothing, so the first steps draw an empty layout.
  torch::NoGradGuard no_grad;
  output->bias.copy_(torch::tensor({-1.0F, -1.0F, 1.0F, 1.0F}));
}

torch::Tensor BoxRegressorImpl::raw(const torch::Tensor& embeddings) {
  return output->forward(torch::relu(hidden->forward(embeddings)));
}

torch::Tensor BoxRegressorImpl::forward(const torch::Tensor& embeddings) {
  return normalize_boxes(torch::sigmoid(raw(embeddings)));
}

// ---------------------------------------------------------------------------

MaskGeneratorImpl::MaskGeneratorImpl(const MaskGeneratorOptions& options) : options_(options) {
  const auto c = options.channels;
  seed = register_module("seed", torch::nn::Linear(options.embedding_dim + options.noise_dim, c * 4 * 4));
  blocks = register_module("blocks", torch::nn::ModuleList());
  // 4x4, then 8, 16, 32 after upsampling, then one more layer at 32.
  for (int i = 0; i < 5; ++i) {
    torch::nn::Sequential block;
    if (i >= 1 && i <= 3) {
      block->push_back(torch::nn::Upsample(
          torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest)));
    }
    block->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 3).padding(1)));
    block->push_back(torch::nn::BatchNorm2d(c));
    block->push_back(torch::nn::ReLU());
    blocks->push_back(block);
  }
  to_mask = register_module("to_mask", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 1)));
}

torch::Tensor MaskGeneratorImpl::forward(const torch::Tensor& embeddings, const torch::Tensor& noise) {
  if (embeddings.dim() != 2 || embeddings.size(1) != options_.embedding_dim) {
    throw ShapeError("mask generator expects [O, " + std::to_string(options_.embedding_dim) + "] embeddings");
  }
  if (noise.dim() != 2 || noise.size(1) != options_.noise_dim || noise.size(0) != embeddings.size(0)) {
    throw ShapeError("mask generator expects [O, " + std::to_string(options_.noise_dim) + "] noise");
  }
  const auto n = embeddings.size(0);
  auto x = seed->forward(torch::cat({embeddings, noise}, 1)).view({n, options_.channels, 4, 4});
  for (const auto& block : *blocks) {
    x = block->as<torch::nn::Sequential>()->forward(x);
  }
  return torch::sigmoid(to_mask->forward(x)).squeeze(1);
}

// ---------------------------------------------------------------------------

AppearanceEncoderImpl::AppearanceEncoderImpl(const AppearanceEncoderOptions& options) : options_(options) {
  const auto b = options.base_channels;
  auto down = [](std::int64_t in, std::int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
  };
  auto lrelu = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); };
  features = register_module(
      "features",
      torch::nn::Sequential(down(3, b), torch::nn::BatchNorm2d(b), lrelu(), down(b, 2 * b),
                            torch::nn::BatchNorm2d(2 * b), lrelu(), down(2 * b, 4 * b),
                            torch::nn::BatchNorm2d(4 * b), lrelu(),
                            torch::nn::AdaptiveAvgPool2d(torch::nn::AdaptiveAvgPool2dOptions(1)),
                            torch::nn::Flatten()));
  hidden = register_module("hidden", torch::nn::Linear(4 * b, options.hidden_dim));
  output = register_module("output", torch::nn::Linear(options.hidden_dim, options.appearance_dim));
}

torch::Tensor AppearanceEncoderImpl::forward(const torch::Tensor& crops) {
  if (crops.dim() != 4 || crops.size(1) != 3 || crops.size(2) != kCropSize || crops.size(3) != kCropSize) {
    throw ShapeError("appearance encoder expects [N, 3, 64, 64] crops, got " + c10::str(crops.sizes()));
  }
  auto h = torch::relu(hidden->forward(features->forward(crops)));
  return torch::relu(output->forward(h));
}

// ---------------------------------------------------------------------------

torch::Tensor compose_feature_map(const torch::Tensor& boxes, const torch::Tensor& masks,
                                  const torch::Tensor& appearances, std::int64_t canvas) {
  const auto n = boxes.size(0);
  if (masks.size(0) != n || appearances.size(0) != n) {
    throw ShapeError("compose_feature_map: boxes, masks and appearances must align per object");
  }
  const auto dim = appearances.size(1);
  auto out = torch::zeros({dim + 1, canvas, canvas}, appearances.options());
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rect = to_pixel_rect(box_from_tensor(boxes[i]), canvas);
    if (rect.empty()) {
      log::debug("skipping object " + std::to_string(i) + ": box covers less than one pixel");
      continue;
    }
    auto mask = F::interpolate(masks[i].view({1, 1, masks.size(1), masks.size(2)}),
                               F::InterpolateFuncOptions()
                                   .size(std::vector<std::int64_t>{rect.height(), rect.width()})
                                   .mode(torch::kBilinear)
                                   .align_corners(false))
                    .view({1, rect.height(), rect.width()});
    auto local = torch::cat({appearances[i].view({dim, 1, 1}) * mask, mask}, 0);
    out = out + F::pad(local, F::PadFuncOptions({rect.x0, canvas - rect.x1, rect.y0, canvas - rect.y1}));
  }
  return out;
}

torch::Tensor compose_feature_maps(const torch::Tensor& boxes, const torch::Tensor& masks,
                                   const torch::Tensor& appearances, const torch::Tensor& object_to_sample,
                                   std::int64_t batch_size, std::int64_t canvas) {
  std::vector<torch::Tensor> maps;
  maps.reserve(static_cast<std::size_t>(batch_size));
  for (std::int64_t b = 0; b < batch_size; ++b) {
    auto index = object_to_sample.eq(b).nonzero().squeeze(1);
    maps.push_back(compose_feature_map(boxes.index_select(0, index), masks.index_select(0, index),
                                       appearances.index_select(0, index), canvas));
  }
  return torch::stack(maps);
}

torch::Tensor crop_boxes(const torch::Tensor& images, const torch::Tensor& boxes,
                         const torch::Tensor& object_to_sample, std::int64_t size) {
  const auto n = boxes.size(0);
  const auto height = images.size(2);
  const auto width = images.size(3);
  std::vector<torch::Tensor> crops;
  crops.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto box = box_from_tensor(boxes[i]);
    auto rect = to_pixel_rect(box, width);
    const auto rect_y = to_pixel_rect(box, height);
    rect.y0 = rect_y.y0;
    rect.y1 = rect_y.y1;
    // Grow degenerate rectangles to one pixel so every object has a crop.
    if (rect.width() < 1) {
      rect.x0 = std::min(rect.x0, width - 1);
      rect.x1 = rect.x0 + 1;
    }
    if (rect.height() < 1) {
      rect.y0 = std::min(rect.y0, height - 1);
      rect.y1 = rect.y0 + 1;
    }
    const auto sample = object_to_sample[i].item<std::int64_t>();
    auto patch = images[sample].slice(1, rect.y0, rect.y1).slice(2, rect.x0, rect.x1).unsqueeze(0);
    crops.push_back(F::interpolate(patch, F::InterpolateFuncOptions()
                                              .size(std::vector<std::int64_t>{size, size})
                                              .mode(torch::kBilinear)
                                              .align_corners(false)));
  }
  if (crops.empty()) {
    return torch::empty({0, images.size(1), size, size}, images.options());
  }
  return torch::cat(crops, 0);
}

}  // namespace covergraph
