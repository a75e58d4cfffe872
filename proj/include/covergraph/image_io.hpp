#pragma once

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace covergraph {

/// [3, H, W] float in [-1, 1] -> 8-bit RGB, rounding to nearest.
cv::Mat tensor_to_rgb8(const torch::Tensor& image);
/// 8-bit RGB -> [3, H, W] float in [-1, 1].
torch::Tensor rgb8_to_tensor(const cv::Mat& rgb);

/// Reads any OpenCV-supported file as 8-bit RGB; empty Mat if unreadable.
cv::Mat read_rgb8(const std::filesystem::path& path);
/// Plain (non-cropping) resize with bilinear filtering.
cv::Mat resize_to(const cv::Mat& image, int side);

std::vector<std::uint8_t> encode_png(const cv::Mat& rgb);
cv::Mat decode_png(const std::vector<std::uint8_t>& bytes);
/// Throws IoError on failure.
void write_png(const std::filesystem::path& path, const cv::Mat& rgb);

/// FNV-1a over raw bytes, for image and parameter fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);
std::string to_hex(std::uint64_t value);

}  // namespace covergraph
