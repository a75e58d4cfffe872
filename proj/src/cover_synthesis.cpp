#include "covergraph/cover_synthesis.hpp"

#include "covergraph/errors.hpp"

namespace covergraph {

namespace {

torch::nn::InstanceNorm2d instance_norm(std::int64_t channels) {
  return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(channels).affine(true));
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels) {
  auto conv = [channels] { return torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)); };
  branch = register_module(
      "branch", torch::nn::Sequential(conv(), instance_norm(channels), torch::nn::ReLU(), conv(), instance_norm(channels)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + branch->forward(x); }

CoverGeneratorImpl::CoverGeneratorImpl(const CoverGeneratorOptions& options) : options_(options) {
  const auto base = options.base_channels;

  contracting = torch::nn::Sequential();
  contracting->push_back(torch::nn::ReflectionPad2d(3));
  contracting->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(options.input_channels, base, 7)));
  contracting->push_back(instance_norm(base));
  contracting->push_back(torch::nn::ReLU());
  auto channels = base;
  for (std::int64_t i = 0; i < options.downsamplings; ++i) {
    contracting->push_back(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels * 2, 3).stride(2).padding(1)));
    contracting->push_back(instance_norm(channels * 2));
    contracting->push_back(torch::nn::ReLU());
    channels *= 2;
  }
  register_module("contracting", contracting);

  residual = register_module("residual", torch::nn::ModuleList());
  for (std::int64_t i = 0; i < options.residual_blocks; ++i) {
    residual->push_back(ResidualBlock(channels));
  }

  expanding = torch::nn::Sequential();
  for (std::int64_t i = 0; i < options.downsamplings; ++i) {
    expanding->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(channels, channels / 2, 3).stride(2).padding(1).output_padding(1)));
    expanding->push_back(instance_norm(channels / 2));
    expanding->push_back(torch::nn::ReLU());
    channels /= 2;
  }
  register_module("expanding", expanding);

  output = register_module("output", torch::nn::Sequential(torch::nn::ReflectionPad2d(3),
                                                           torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 3, 7)),
                                                           torch::nn::Tanh()));
}

void CoverGeneratorImpl::check_input(const torch::Tensor& features) const {
  if (features.dim() != 4 || features.size(1) != options_.input_channels) {
    throw ShapeError("cover generator expects [B, " + std::to_string(options_.input_channels) +
                     ", H, W] features, got " + c10::str(features.sizes()));
  }
  const auto factor = std::int64_t{1} << options_.downsamplings;
  if (features.size(2) % factor != 0 || features.size(3) % factor != 0) {
    throw ShapeError("cover generator needs spatial size divisible by " + std::to_string(factor));
  }
}

torch::Tensor CoverGeneratorImpl::encode(const torch::Tensor& features) {
  check_input(features);
  auto x = contracting->forward(features);
  for (const auto& block : *residual) {
    x = block->as<ResidualBlock>()->forward(x);
  }
  return x;
}

torch::Tensor CoverGeneratorImpl::forward(const torch::Tensor& features) {
  return output->forward(expanding->forward(encode(features)));
}

std::vector<std::vector<std::int64_t>> CoverGeneratorImpl::trace_shapes(const torch::Tensor& features) {
  check_input(features);
  std::vector<std::vector<std::int64_t>> shapes;
  auto record = [&](const torch::Tensor& t) { shapes.push_back(t.sizes().vec()); };
  auto x = features;
  record(x);
  for (auto& layer : *contracting) {
    x = layer.forward(x);
    if (layer.ptr()->as<torch::nn::Conv2d>() != nullptr) {
      record(x);
    }
  }
  for (const auto& block : *residual) {
    x = block->as<ResidualBlock>()->forward(x);
  }
  record(x);
  for (auto& layer : *expanding) {
    x = layer.forward(x);
    if (layer.ptr()->as<torch::nn::ConvTranspose2d>() != nullptr) {
      record(x);
    }
  }
  record(output->forward(x));
  return shapes;
}

}  // namespace covergraph
