#include "covergraph/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstdio>
#include <cstring>

#include "covergraph/errors.hpp"

namespace covergraph {

cv::Mat tensor_to_rgb8(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) {
    throw ShapeError("expected a [3, H, W] image tensor, got " + c10::str(image.sizes()));
  }
  auto hwc = ((image.detach().to(torch::kFloat32).clamp(-1.0, 1.0) + 1.0) * 127.5)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3);
  std::memcpy(out.data, hwc.data_ptr<std::uint8_t>(), static_cast<std::size_t>(hwc.numel()));
  return out;
}

torch::Tensor rgb8_to_tensor(const cv::Mat& rgb) {
  if (rgb.type() != CV_8UC3) {
    throw ShapeError("expected an 8-bit 3-channel image");
  }
  cv::Mat contiguous = rgb.isContinuous() ? rgb : rgb.clone();
  auto hwc = torch::from_blob(contiguous.data, {contiguous.rows, contiguous.cols, 3}, torch::kUInt8).clone();
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

cv::Mat read_rgb8(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    return bgr;
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat resize_to(const cv::Mat& image, int side) {
  cv::Mat out;
  cv::resize(image, out, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
  return out;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", bgr, bytes)) {
    throw IoError("PNG encoding failed");
  }
  return bytes;
}

cv::Mat decode_png(const std::vector<std::uint8_t>& bytes) {
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw IoError("PNG decoding failed");
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void write_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  const auto bytes = encode_png(rgb);
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  const auto written = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (written != bytes.size()) {
    throw IoError("short write to '" + path.string() + "'");
  }
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  auto h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace covergraph
