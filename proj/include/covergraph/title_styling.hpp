#pragma once

#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "covergraph/object_synthesis.hpp"

namespace covergraph {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

/// The Hershey faces used for titles; a font id is an index into this list.
const std::vector<int>& title_fonts();
std::size_t title_font_count();

inline constexpr double kTitleMargin = 0.05;

/// Anti-aliased coverage (0..255) of `text` fitted into a width x height
/// box, centred, leaving a 5% margin on every side. Unknown font ids fall
/// back to the plain face with a warning.
cv::Mat render_text_coverage(const std::string& text, std::size_t font, int width, int height);

/// Blends `color` over `background` (8-bit RGB, box-sized) using coverage.
cv::Mat blend_text(const cv::Mat& background, const cv::Mat& coverage, Rgb color);

/// Placeholder title drawn over `background`.
cv::Mat render_placeholder(const cv::Mat& background, const std::string& text, std::size_t font, Rgb color);

/// CIE76 colour difference between two sRGB colours.
double delta_e(Rgb a, Rgb b);

struct TitleRegion {
  PixelRect box;
  cv::Mat crop;  // stylised placeholder, 8-bit RGB, box-sized
  std::string desired_text;
  std::string placeholder_text = "Lorem Ipsum";
};

struct StyleTransferResult {
  cv::Mat fused;       // desired text in the placeholder's style over the erased background
  cv::Mat background;  // placeholder erased
  std::size_t font = 0;
  Rgb text_color;
  Rgb background_color;
  std::string backend;  // "external" or "fallback"
};

/// 2-means colour split, background fill, and font matching against the
/// training fonts. Works on any non-empty crop.
StyleTransferResult fallback_transfer(const TitleRegion& region);

enum class TitleBackendKind { fallback, external };

struct TitleBackend {
  TitleBackendKind kind = TitleBackendKind::fallback;
  // External program invoked as `<command> <text.png> <style.png> <out_dir>`;
  // it must write out_dir/fused.png and out_dir/background.png, both sized
  // like the inputs.
  std::string command;
};

TitleBackendKind parse_title_backend(const std::string& name);

/// Uses the external adapter when configured, falling back (with a logged
/// downgrade notice) whenever it is missing or misbehaves.
StyleTransferResult transfer_title_style(const TitleRegion& region, const TitleBackend& backend);

/// Writes `patch` into `cover` at `box`, clipped to the canvas.
cv::Mat paste_title(const cv::Mat& cover, const cv::Mat& patch, const PixelRect& box);

}  // namespace covergraph
