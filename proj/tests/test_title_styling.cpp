#include "doctest_torch.hpp"

#include <opencv2/imgproc.hpp>

#include <filesystem>
#include <fstream>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"
#include "covergraph/title_styling.hpp"

using namespace covergraph;

namespace {

cv::Mat flat(int w, int h, Rgb c) { return cv::Mat(h, w, CV_8UC3, cv::Scalar(c.r, c.g, c.b)); }

double pixel_distance(const cv::Vec3b& p, Rgb c) {
  const double dr = p[0] - c.r, dg = p[1] - c.g, db = p[2] - c.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

// Placeholder pixels left behind: away from the background colour and not
// covered by the newly drawn text.
int residual_pixels(const cv::Mat& image, const cv::Mat& new_coverage, Rgb background, double tolerance) {
  int count = 0;
  for (int y = 0; y < image.rows; ++y) {
    for (int x = 0; x < image.cols; ++x) {
      if ((new_coverage.empty() || new_coverage.at<std::uint8_t>(y, x) == 0) &&
          pixel_distance(image.at<cv::Vec3b>(y, x), background) > tolerance) {
        ++count;
      }
    }
  }
  return count;
}

struct SinkGuard {
  std::vector<std::string> messages;
  log::Sink previous;
  SinkGuard() {
    previous = log::set_sink([this](log::Level, std::string_view m) { messages.emplace_back(m); });
  }
  ~SinkGuard() { log::set_sink(previous); }
};

}  // namespace

TEST_CASE("placeholder rendering is deterministic and stays in its box") {
  CHECK(title_font_count() >= 6);
  const Rgb color{200, 40, 30};
  auto bg = flat(90, 24, Rgb{20, 20, 60});
  auto a = render_placeholder(bg, "Lorem Ipsum", 2, color);
  auto b = render_placeholder(bg, "Lorem Ipsum", 2, color);
  CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);
  CHECK(a.size() == bg.size());

  auto coverage = render_text_coverage("Lorem Ipsum", 2, 90, 24);
  cv::Mat points;
  cv::findNonZero(coverage, points);
  REQUIRE_FALSE(points.empty());
  auto bounds = cv::boundingRect(points);
  CHECK(bounds.x >= 0);
  CHECK(bounds.y >= 0);
  CHECK(bounds.x + bounds.width <= 90);
  CHECK(bounds.y + bounds.height <= 24);
  // The text is sized to the box: it spans most of the inner width.
  CHECK(bounds.width >= 0.6 * 90);
}

TEST_CASE("rendered text colour matches the request") {
  const Rgb color{230, 200, 40};
  auto bg = flat(120, 32, Rgb{10, 30, 90});
  auto out = render_placeholder(bg, "Lorem Ipsum", 0, color);
  auto coverage = render_text_coverage("Lorem Ipsum", 0, 120, 32);
  cv::Vec3d sum(0, 0, 0);
  int n = 0;
  for (int y = 0; y < out.rows; ++y) {
    for (int x = 0; x < out.cols; ++x) {
      if (coverage.at<std::uint8_t>(y, x) == 255) {
        const auto& p = out.at<cv::Vec3b>(y, x);
        sum += cv::Vec3d(p[0], p[1], p[2]);
        ++n;
      }
    }
  }
  REQUIRE(n > 0);
  const Rgb mean{static_cast<std::uint8_t>(sum[0] / n), static_cast<std::uint8_t>(sum[1] / n),
                 static_cast<std::uint8_t>(sum[2] / n)};
  CHECK(delta_e(mean, color) < 10.0);
}

TEST_CASE("text that cannot fit is shrunk and logged") {
  SinkGuard sink;
  auto coverage = render_text_coverage("An Extremely Long Title For Such A Box", 3, 20, 12);
  CHECK(coverage.size() == cv::Size(20, 12));
  CHECK_FALSE(sink.messages.empty());
}

TEST_CASE("fallback recovers font and colour on synthetic crops") {
  const std::vector<std::size_t> five_fonts = {0, 2, 4, 5, 7};
  const std::vector<std::pair<Rgb, Rgb>> palettes = {
      {Rgb{240, 230, 210}, Rgb{150, 20, 20}},
      {Rgb{15, 25, 60}, Rgb{250, 210, 60}},
      {Rgb{40, 110, 60}, Rgb{250, 250, 250}},
  };
  for (auto font : five_fonts) {
    for (const auto& [bg_color, text_color] : palettes) {
      CAPTURE(font);
      TitleRegion region;
      region.box = PixelRect{0, 0, 150, 40};
      region.crop = render_placeholder(flat(150, 40, bg_color), "Lorem Ipsum", font, text_color);
      region.desired_text = "Sheep";
      auto result = fallback_transfer(region);
      CHECK(result.font == font);
      CHECK(delta_e(result.text_color, text_color) < 15.0);
      CHECK(delta_e(result.background_color, bg_color) < 5.0);
      CHECK(result.fused.size() == region.crop.size());
      CHECK(result.background.size() == region.crop.size());
    }
  }
}

TEST_CASE("a short replacement erases the longer placeholder") {
  const Rgb bg{235, 225, 200};
  TitleRegion region;
  region.box = PixelRect{10, 80, 118, 108};
  region.crop = render_placeholder(flat(108, 28, bg), "Lorem Ipsum", 3, Rgb{120, 20, 30});
  region.desired_text = "Sheep";
  auto result = fallback_transfer(region);
  const double tolerance = 24.0;
  CHECK(residual_pixels(result.background, cv::Mat(), bg, tolerance) == 0);
  auto coverage = render_text_coverage("Sheep", result.font, 108, 28);
  CHECK(residual_pixels(result.fused, coverage, bg, tolerance) == 0);
  // The new text is actually there.
  CHECK(cv::countNonZero(coverage) > 0);
}

TEST_CASE("fallback is total") {
  cv::Mat noise(17, 33, CV_8UC3);
  cv::randu(noise, 0, 255);
  for (const auto& crop : {noise, flat(5, 5, Rgb{1, 2, 3}), flat(1, 1, Rgb{9, 9, 9})}) {
    TitleRegion region{PixelRect{0, 0, crop.cols, crop.rows}, crop, "Hi"};
    auto result = fallback_transfer(region);
    CHECK(result.fused.size() == crop.size());
  }
  CHECK_THROWS_AS(fallback_transfer(TitleRegion{PixelRect{}, cv::Mat(), "x"}), ShapeError);
}

TEST_CASE("paste_title") {
  cv::Mat cover(128, 128, CV_8UC3);
  cv::randu(cover, 0, 255);
  const PixelRect box{20, 30, 70, 50};
  cv::Mat original_crop = cover(cv::Rect(20, 30, 50, 20)).clone();
  CHECK(cv::norm(paste_title(cover, original_crop, box), cover, cv::NORM_INF) == 0.0);

  auto patch = flat(50, 20, Rgb{1, 2, 3});
  auto pasted = paste_title(cover, patch, box);
  cv::Mat outside = cv::Mat::ones(128, 128, CV_8U);
  outside(cv::Rect(20, 30, 50, 20)).setTo(0);
  cv::Mat diff;
  cv::absdiff(pasted, cover, diff);
  cv::Mat diff_gray;
  cv::cvtColor(diff, diff_gray, cv::COLOR_RGB2GRAY);
  CHECK(cv::countNonZero(diff_gray.mul(outside)) == 0);
  CHECK(cv::norm(pasted(cv::Rect(20, 30, 50, 20)), patch, cv::NORM_INF) == 0.0);

  // Boxes hanging over each border: only the in-canvas part is written.
  const std::vector<PixelRect> edges = {{-10, 40, 20, 60}, {110, 40, 140, 60}, {40, -5, 70, 10}, {40, 120, 70, 135}};
  for (const auto& e : edges) {
    cv::Mat p(static_cast<int>(e.height()), static_cast<int>(e.width()), CV_8UC3);
    cv::randu(p, 0, 255);
    auto out = paste_title(cover, p, e);
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) {
        const bool inside = x >= e.x0 && x < e.x1 && y >= e.y0 && y < e.y1;
        const auto expected = inside ? p.at<cv::Vec3b>(static_cast<int>(y - e.y0), static_cast<int>(x - e.x0))
                                     : cover.at<cv::Vec3b>(y, x);
        REQUIRE(out.at<cv::Vec3b>(y, x) == expected);
      }
    }
  }
  CHECK_THROWS_AS(paste_title(cover, patch, PixelRect{0, 0, 10, 10}), ShapeError);
}

TEST_CASE("external backend adapter and downgrade") {
  namespace fs = std::filesystem;
  TitleRegion region{PixelRect{0, 0, 60, 20}, render_placeholder(flat(60, 20, Rgb{200, 200, 200}), "Lorem Ipsum", 0,
                                                                 Rgb{10, 10, 10}),
                     "Sheep"};
  {
    SinkGuard sink;
    auto r = transfer_title_style(region, TitleBackend{TitleBackendKind::external, ""});
    CHECK(r.backend == "fallback");
    CHECK_FALSE(sink.messages.empty());
  }
  {
    SinkGuard sink;
    auto r = transfer_title_style(region, TitleBackend{TitleBackendKind::external, "/nonexistent/srnet"});
    CHECK(r.backend == "fallback");
  }
  // A stand-in adapter that echoes the style image as both outputs.
  const auto script = fs::temp_directory_path() / "covergraph_fake_srnet.sh";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\ncp \"$2\" \"$3/fused.png\"\ncp \"$2\" \"$3/background.png\"\n";
  }
  fs::permissions(script, fs::perms::owner_all);
  auto r = transfer_title_style(region, TitleBackend{TitleBackendKind::external, script.string()});
  CHECK(r.backend == "external");
  CHECK(r.fused.size() == region.crop.size());
  CHECK(cv::norm(r.fused, region.crop, cv::NORM_INF) == 0.0);
  fs::remove(script);

  CHECK(parse_title_backend("fallback") == TitleBackendKind::fallback);
  CHECK_THROWS_AS(parse_title_backend("srnet"), ConfigError);
}

TEST_CASE("image conversions") {
  cv::Mat rgb(9, 7, CV_8UC3);
  cv::randu(rgb, 0, 255);
  auto t = rgb8_to_tensor(rgb);
  CHECK(t.sizes() == torch::IntArrayRef({3, 9, 7}));
  CHECK(t.min().item<float>() >= -1.0F);
  CHECK(cv::norm(tensor_to_rgb8(t), rgb, cv::NORM_INF) == 0.0);
  CHECK(cv::norm(decode_png(encode_png(rgb)), rgb, cv::NORM_INF) == 0.0);
}
