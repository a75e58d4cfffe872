#include "covergraph/perception.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include "covergraph/errors.hpp"

namespace covergraph {

namespace {

constexpr std::int64_t kPool = -1;
// VGG16 configuration through pool4.
const std::vector<std::int64_t> kLayout = {64,  64,  kPool, 128, 128, kPool, 256, 256,
                                           256, kPool, 512, 512, 512, kPool};

}  // namespace

PerceptionNetImpl::PerceptionNetImpl(const PerceptionOptions& options) {
  if (options.width_divisor < 1) {
    throw ConfigError("perception width_divisor must be >= 1");
  }
  features = torch::nn::Sequential();
  std::int64_t in = 3;
  for (auto c : kLayout) {
    if (c == kPool) {
      features->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
      tap_after_.push_back(static_cast<std::int64_t>(features->size()) - 1);
      continue;
    }
    const auto out = c / options.width_divisor;
    features->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1)));
    features->push_back(torch::nn::ReLU());
    in = out;
  }
  register_module("features", features);
  mean_ = register_buffer("mean", torch::tensor({0.485F, 0.456F, 0.406F}).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229F, 0.224F, 0.225F}).view({1, 3, 1, 1}));

  const std::string prefix = "random:";
  if (options.source.rfind(prefix, 0) == 0) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(options.source.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("perception source '" + options.source + "' has a malformed seed");
    }
    // Private generator: the extractor must not depend on the global seed.
    auto gen = torch::make_generator<at::CPUGeneratorImpl>(seed);
    torch::NoGradGuard no_grad;
    for (auto& item : features->named_parameters()) {
      auto& p = item.value();
      if (p.dim() == 4) {
        const auto fan_in = p.size(1) * p.size(2) * p.size(3);
        p.copy_(torch::randn(p.sizes(), gen) * std::sqrt(2.0 / static_cast<double>(fan_in)));
      } else {
        p.zero_();
      }
    }
  } else {
    if (options.width_divisor != 1) {
      throw ConfigError("pretrained perception weights require width_divisor = 1");
    }
    load_state(options.source);
  }
  for (auto& p : parameters()) {
    p.requires_grad_(false);
  }
  eval();
}

void PerceptionNetImpl::load_state(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("perception weights not found at '" + path + "'");
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto dict = [&] {
    try {
      return torch::pickle_load(bytes).toGenericDict();
    } catch (const c10::Error& e) {
      throw ConfigError("perception weights at '" + path + "' are unreadable: " + e.what_without_backtrace());
    }
  }();
  torch::NoGradGuard no_grad;
  for (auto& item : features->named_parameters()) {
    const auto key = "features." + item.key();
    auto it = dict.find(key);
    if (it == dict.end()) {
      throw ConfigError("perception weights at '" + path + "' lack " + key);
    }
    auto value = it->value().toTensor();
    if (value.sizes() != item.value().sizes()) {
      throw ConfigError("perception weight " + key + " has shape " + c10::str(value.sizes()));
    }
    item.value().copy_(value);
  }
}

std::vector<torch::Tensor> PerceptionNetImpl::forward(const torch::Tensor& images) {
  auto x = ((images + 1.0) * 0.5 - mean_) / std_;
  std::vector<torch::Tensor> taps;
  std::size_t next = 0;
  std::int64_t index = 0;
  for (auto& layer : *features) {
    x = layer.forward(x);
    if (next < tap_after_.size() && tap_after_[next] == index) {
      taps.push_back(x);
      ++next;
    }
    ++index;
  }
  return taps;
}

}  // namespace covergraph
