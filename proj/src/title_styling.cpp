#include "covergraph/title_styling.hpp"

#include <opencv2/imgproc.hpp>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"

namespace covergraph {

namespace {

constexpr double kMinScale = 0.1;
// Pixels this far (RGB L2) from the background colour count as text.
constexpr double kTextDistance = 24.0;

cv::Vec3d to_vec(Rgb c) { return {static_cast<double>(c.r), static_cast<double>(c.g), static_cast<double>(c.b)}; }

Rgb to_rgb(const cv::Vec3d& v) {
  auto ch = [](double x) { return static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L)); };
  return {ch(v[0]), ch(v[1]), ch(v[2])};
}

double distance(const cv::Vec3b& p, const cv::Vec3d& c) {
  const double dr = p[0] - c[0], dg = p[1] - c[1], db = p[2] - c[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

struct ColorSplit {
  cv::Vec3d background;
  cv::Vec3d text;
  cv::Mat text_mask;  // CV_8U, 255 where a pixel reads as text
};

ColorSplit split_colors(const cv::Mat& crop) {
  const int n = crop.rows * crop.cols;
  cv::Mat samples(n, 3, CV_32F);
  cv::Mat labels(n, 1, CV_32S);
  double mean_luma = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& p = crop.at<cv::Vec3b>(i / crop.cols, i % crop.cols);
    mean_luma += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  mean_luma /= n;
  bool split = false;
  for (int i = 0; i < n; ++i) {
    const auto& p = crop.at<cv::Vec3b>(i / crop.cols, i % crop.cols);
    for (int c = 0; c < 3; ++c) {
      samples.at<float>(i, c) = p[c];
    }
    const int label = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) > mean_luma ? 1 : 0;
    labels.at<int>(i) = label;
    split = split || label != labels.at<int>(0);
  }

  ColorSplit out;
  if (!split) {
    // Flat crop: nothing to erase.
    out.background = cv::Vec3d(samples.at<float>(0, 0), samples.at<float>(0, 1), samples.at<float>(0, 2));
    out.text = cv::Vec3d(255, 255, 255) - out.background;
    out.text_mask = cv::Mat::zeros(crop.size(), CV_8U);
    return out;
  }
  cv::Mat centers;
  cv::kmeans(samples, 2, labels, cv::TermCriteria(cv::TermCriteria::COUNT + cv::TermCriteria::EPS, 50, 1e-3), 1,
             cv::KMEANS_USE_INITIAL_LABELS, centers);
  int count1 = cv::countNonZero(labels);
  const int bg_label = count1 * 2 > n ? 1 : 0;
  for (int c = 0; c < 3; ++c) {
    out.background[c] = centers.at<float>(bg_label, c);
  }

  // Text colour from the pixels farthest from the background; anti-aliased
  // edges drag the plain cluster mean toward the background.
  std::vector<std::pair<double, int>> far;
  for (int i = 0; i < n; ++i) {
    if (labels.at<int>(i) != bg_label) {
      far.emplace_back(distance(crop.at<cv::Vec3b>(i / crop.cols, i % crop.cols), out.background), i);
    }
  }
  std::sort(far.begin(), far.end(), std::greater<>());
  const auto keep = std::max<std::size_t>(1, far.size() * 3 / 10);
  cv::Vec3d sum(0, 0, 0);
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& p = crop.at<cv::Vec3b>(far[k].second / crop.cols, far[k].second % crop.cols);
    sum += cv::Vec3d(p[0], p[1], p[2]);
  }
  out.text = sum / static_cast<double>(keep);

  out.text_mask = cv::Mat::zeros(crop.size(), CV_8U);
  for (int y = 0; y < crop.rows; ++y) {
    for (int x = 0; x < crop.cols; ++x) {
      if (distance(crop.at<cv::Vec3b>(y, x), out.background) > kTextDistance) {
        out.text_mask.at<std::uint8_t>(y, x) = 255;
      }
    }
  }
  cv::dilate(out.text_mask, out.text_mask, cv::getStructuringElement(cv::MORPH_RECT, cv::Size(3, 3)));
  return out;
}

double l1_distance(const cv::Mat& a, const cv::Mat& b) { return cv::norm(a, b, cv::NORM_L1); }

}  // namespace

const std::vector<int>& title_fonts() {
  static const std::vector<int> fonts = {
      cv::FONT_HERSHEY_SIMPLEX,        cv::FONT_HERSHEY_DUPLEX,         cv::FONT_HERSHEY_COMPLEX,
      cv::FONT_HERSHEY_TRIPLEX,        cv::FONT_HERSHEY_SCRIPT_SIMPLEX, cv::FONT_HERSHEY_SCRIPT_COMPLEX,
      cv::FONT_HERSHEY_SIMPLEX | cv::FONT_ITALIC, cv::FONT_HERSHEY_TRIPLEX | cv::FONT_ITALIC,
  };
  return fonts;
}

std::size_t title_font_count() { return title_fonts().size(); }

cv::Mat render_text_coverage(const std::string& text, std::size_t font, int width, int height) {
  cv::Mat coverage = cv::Mat::zeros(std::max(height, 0), std::max(width, 0), CV_8U);
  if (width < 1 || height < 1 || text.empty()) {
    return coverage;
  }
  int face = cv::FONT_HERSHEY_PLAIN;
  if (font < title_fonts().size()) {
    face = title_fonts()[font];
  } else {
    log::warn("font id " + std::to_string(font) + " unavailable; using the plain built-in face");
  }
  // Drawn at 4x and area-averaged so strokes keep solid cores.
  constexpr int kSuper = 4;
  const double inner_w = kSuper * width * (1.0 - 2 * kTitleMargin);
  const double inner_h = kSuper * height * (1.0 - 2 * kTitleMargin);

  int baseline = 0;
  const cv::Size unit = cv::getTextSize(text, face, 1.0, 1, &baseline);
  double scale = std::min(inner_w / unit.width, inner_h / (unit.height + baseline));
  const int thickness = std::max(1, static_cast<int>(std::lround(kSuper * std::max(1.5, 2.0 * scale / kSuper))));
  cv::Size size;
  for (int guard = 0; guard < 64; ++guard) {
    size = cv::getTextSize(text, face, scale, thickness, &baseline);
    if (size.width <= inner_w && size.height + baseline <= inner_h) {
      break;
    }
    scale *= 0.95;
  }
  if (scale / kSuper < kMinScale) {
    log::warn("title text '" + text + "' needs scale " + std::to_string(scale / kSuper) + " to fit its box");
  }
  cv::Mat big = cv::Mat::zeros(kSuper * height, kSuper * width, CV_8U);
  const int x = static_cast<int>(std::lround((big.cols - size.width) / 2.0));
  const int y = static_cast<int>(std::lround((big.rows - (size.height + baseline)) / 2.0)) + size.height;
  cv::putText(big, text, cv::Point(x, y), face, scale, cv::Scalar(255), thickness, cv::LINE_AA);
  cv::resize(big, coverage, coverage.size(), 0, 0, cv::INTER_AREA);
  return coverage;
}

cv::Mat blend_text(const cv::Mat& background, const cv::Mat& coverage, Rgb color) {
  if (background.size() != coverage.size() || background.type() != CV_8UC3) {
    throw ShapeError("blend_text needs an RGB background the size of the coverage map");
  }
  cv::Mat out = background.clone();
  const cv::Vec3d c = to_vec(color);
  for (int y = 0; y < out.rows; ++y) {
    for (int x = 0; x < out.cols; ++x) {
      const double a = coverage.at<std::uint8_t>(y, x) / 255.0;
      if (a <= 0.0) {
        continue;
      }
      auto& p = out.at<cv::Vec3b>(y, x);
      for (int k = 0; k < 3; ++k) {
        p[k] = cv::saturate_cast<std::uint8_t>(std::lround(p[k] * (1.0 - a) + c[k] * a));
      }
    }
  }
  return out;
}

cv::Mat render_placeholder(const cv::Mat& background, const std::string& text, std::size_t font, Rgb color) {
  return blend_text(background, render_text_coverage(text, font, background.cols, background.rows), color);
}

double delta_e(Rgb a, Rgb b) {
  cv::Mat pixels(1, 2, CV_32FC3);
  pixels.at<cv::Vec3f>(0, 0) = cv::Vec3f(a.r / 255.0F, a.g / 255.0F, a.b / 255.0F);
  pixels.at<cv::Vec3f>(0, 1) = cv::Vec3f(b.r / 255.0F, b.g / 255.0F, b.b / 255.0F);
  cv::Mat lab;
  cv::cvtColor(pixels, lab, cv::COLOR_RGB2Lab);
  const auto d = lab.at<cv::Vec3f>(0, 0) - lab.at<cv::Vec3f>(0, 1);
  return std::sqrt(static_cast<double>(d.dot(d)));
}

StyleTransferResult fallback_transfer(const TitleRegion& region) {
  if (region.crop.empty() || region.crop.type() != CV_8UC3) {
    throw ShapeError("title crop must be a non-empty 8-bit RGB image");
  }
  const auto split = split_colors(region.crop);
  StyleTransferResult result;
  result.backend = "fallback";
  result.background_color = to_rgb(split.background);
  result.text_color = to_rgb(split.text);

  result.background = region.crop.clone();
  const cv::Vec3b fill(result.background_color.r, result.background_color.g, result.background_color.b);
  result.background.setTo(cv::Scalar(fill[0], fill[1], fill[2]), split.text_mask);

  // Font whose re-rendered placeholder best reproduces the crop.
  cv::Mat flat(region.crop.size(), CV_8UC3, cv::Scalar(fill[0], fill[1], fill[2]));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < title_font_count(); ++f) {
    const double d = l1_distance(render_placeholder(flat, region.placeholder_text, f, result.text_color), region.crop);
    if (d < best) {
      best = d;
      result.font = f;
    }
  }
  result.fused = render_placeholder(result.background, region.desired_text, result.font, result.text_color);
  return result;
}

TitleBackendKind parse_title_backend(const std::string& name) {
  if (name == "fallback") {
    return TitleBackendKind::fallback;
  }
  if (name == "external") {
    return TitleBackendKind::external;
  }
  throw ConfigError("unknown title backend '" + name + "' (expected external or fallback)");
}

namespace {

std::optional<StyleTransferResult> run_external(const TitleRegion& region, const std::string& command) {
  namespace fs = std::filesystem;
  static std::atomic<std::uint64_t> counter{0};
  const auto dir = fs::temp_directory_path() /
                   ("covergraph_title_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};

  // Plain rendering of the desired text, black on mid grey.
  cv::Mat plain(region.crop.size(), CV_8UC3, cv::Scalar(127, 127, 127));
  plain = render_placeholder(plain, region.desired_text, 0, Rgb{0, 0, 0});
  write_png(dir / "text.png", plain);
  write_png(dir / "style.png", region.crop);
  const std::string cmd = command + " '" + (dir / "text.png").string() + "' '" + (dir / "style.png").string() +
                          "' '" + dir.string() + "'";
  if (std::system(cmd.c_str()) != 0) {
    log::warn("external title backend failed: " + command);
    return std::nullopt;
  }
  StyleTransferResult result;
  result.backend = "external";
  result.fused = read_rgb8(dir / "fused.png");
  result.background = read_rgb8(dir / "background.png");
  if (result.fused.size() != region.crop.size() || result.background.size() != region.crop.size()) {
    log::warn("external title backend returned missing or mis-sized images");
    return std::nullopt;
  }
  return result;
}

}  // namespace

StyleTransferResult transfer_title_style(const TitleRegion& region, const TitleBackend& backend) {
  if (backend.kind == TitleBackendKind::external) {
    if (backend.command.empty()) {
      log::warn("external title backend not configured; downgrading to fallback");
    } else if (auto result = run_external(region, backend.command)) {
      return *result;
    } else {
      log::warn("downgrading title styling to the fallback backend");
    }
  }
  return fallback_transfer(region);
}

cv::Mat paste_title(const cv::Mat& cover, const cv::Mat& patch, const PixelRect& box) {
  cv::Mat out = cover.clone();
  if (patch.cols != box.width() || patch.rows != box.height()) {
    throw ShapeError("title patch does not match its box");
  }
  const auto x0 = std::max<std::int64_t>(box.x0, 0);
  const auto y0 = std::max<std::int64_t>(box.y0, 0);
  const auto x1 = std::min<std::int64_t>(box.x1, cover.cols);
  const auto y1 = std::min<std::int64_t>(box.y1, cover.rows);
  if (x1 <= x0 || y1 <= y0) {
    return out;
  }
  const cv::Rect dst(static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1 - x0), static_cast<int>(y1 - y0));
  const cv::Rect src(static_cast<int>(x0 - box.x0), static_cast<int>(y0 - box.y0), dst.width, dst.height);
  patch(src).copyTo(out(dst));
  return out;
}

}  // namespace covergraph
