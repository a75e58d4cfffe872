#include "covergraph/data_pipeline.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"
#include "covergraph/log.hpp"

namespace covergraph {

namespace F = torch::nn::functional;
using nlohmann::json;

namespace {

constexpr int kPolygonShift = 4;  // fillPoly sub-pixel bits

std::vector<std::vector<cv::Point>> fixed_point(const std::vector<std::vector<cv::Point2f>>& polygons) {
  std::vector<std::vector<cv::Point>> out;
  for (const auto& poly : polygons) {
    std::vector<cv::Point> pts;
    for (const auto& p : poly) {
      pts.emplace_back(static_cast<int>(std::lround(p.x * (1 << kPolygonShift))),
                       static_cast<int>(std::lround(p.y * (1 << kPolygonShift))));
    }
    out.push_back(std::move(pts));
  }
  return out;
}

cv::Mat draw_polygons(const std::vector<std::vector<cv::Point2f>>& polygons, cv::Size size) {
  cv::Mat mask = cv::Mat::zeros(size, CV_8U);
  cv::fillPoly(mask, fixed_point(polygons), cv::Scalar(255), cv::LINE_8, kPolygonShift);
  return mask;
}

cv::Rect source_rect(const BoundingBox& box, cv::Size size) {
  const int x0 = std::clamp(static_cast<int>(std::floor(box.x0 * size.width + 1e-9)), 0, size.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.y0 * size.height + 1e-9)), 0, size.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.x1 * size.width - 1e-9)), x0 + 1, size.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.y1 * size.height - 1e-9)), y0 + 1, size.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

torch::Tensor binary_mask_32(const cv::Mat& region) {
  cv::Mat small;
  cv::resize(region, small, cv::Size(kMaskSize, kMaskSize), 0, 0, cv::INTER_AREA);
  auto t = torch::from_blob(small.data, {kMaskSize, kMaskSize}, torch::kUInt8).clone();
  return (t >= 128).to(torch::kFloat32);
}

torch::Tensor boxes_tensor(const std::vector<SceneObject>& objects) {
  std::vector<torch::Tensor> rows;
  for (const auto& o : objects) {
    rows.push_back(box_to_tensor(o.box));
  }
  return rows.empty() ? torch::zeros({0, 4}) : torch::stack(rows);
}

void refresh_crops(SceneSample& sample) {
  if (sample.objects.empty()) {
    return;
  }
  auto owner = torch::zeros({static_cast<std::int64_t>(sample.objects.size())}, torch::kInt64);
  auto crops = crop_boxes(sample.image.unsqueeze(0), boxes_tensor(sample.objects), owner);
  for (std::size_t i = 0; i < sample.objects.size(); ++i) {
    sample.objects[i].crop = crops[static_cast<std::int64_t>(i)].contiguous();
  }
}

BoundingBox box_of_rect(const PixelRect& r, std::int64_t canvas) {
  const double c = static_cast<double>(canvas);
  return {r.x0 / c, r.y0 / c, r.x1 / c, r.y1 / c};
}

// Random pixel-aligned rectangle with side fractions in the given ranges.
PixelRect random_rect(std::mt19937_64& rng, double min_w, double max_w, double min_h, double max_h) {
  std::uniform_real_distribution<double> uw(min_w, max_w), uh(min_h, max_h), unit(0.0, 1.0);
  const auto w = std::max<std::int64_t>(2, std::lround(uw(rng) * kCanvasSize));
  const auto h = std::max<std::int64_t>(2, std::lround(uh(rng) * kCanvasSize));
  const auto x = static_cast<std::int64_t>(std::floor(unit(rng) * static_cast<double>(kCanvasSize - w + 1)));
  const auto y = static_cast<std::int64_t>(std::floor(unit(rng) * static_cast<double>(kCanvasSize - h + 1)));
  return {x, y, x + w, y + h};
}

Rgb random_title_color(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> hue(0, 179), sat(0, 255), val(77, 255);  // V >= 0.3
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue(rng), sat(rng), val(rng)));
  cv::Mat rgb;
  cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  const auto p = rgb.at<cv::Vec3b>(0, 0);
  return {p[0], p[1], p[2]};
}

std::vector<std::int64_t> category_key(const AugmentedSample& s) {
  std::vector<std::int64_t> key;
  for (const auto& o : s.scene.objects) {
    key.push_back(o.category);
  }
  std::sort(key.begin(), key.end());
  return key;
}

}  // namespace

// ---------------------------------------------------------------------------

torch::Tensor rasterize_mask(const std::vector<std::vector<cv::Point2f>>& polygons, cv::Size source,
                             const BoundingBox& box) {
  const auto full = draw_polygons(polygons, source);
  return binary_mask_32(full(source_rect(box, source)));
}

SceneDataset ingest_scene_dataset(const SceneDatasetOptions& options) {
  std::ifstream in(options.annotations);
  if (!in) {
    throw IoError("cannot open annotations '" + options.annotations.string() + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("annotations '" + options.annotations.string() + "' do not parse: " + e.what());
  }
  if (!doc.contains("images") || !doc.contains("annotations") || !doc.contains("categories")) {
    throw IoError("annotations must hold images, annotations and categories");
  }

  std::vector<std::pair<std::int64_t, std::string>> categories;
  for (const auto& c : doc["categories"]) {
    categories.emplace_back(c.at("id").get<std::int64_t>(), c.at("name").get<std::string>());
  }
  std::sort(categories.begin(), categories.end());
  std::vector<std::string> names;
  std::map<std::int64_t, std::string> name_of;
  for (const auto& [id, name] : categories) {
    names.push_back(name);
    name_of[id] = name;
  }
  SceneDataset dataset{CategoryVocabulary(names), {}, 0};

  std::map<std::int64_t, std::vector<const json*>> by_image;
  for (const auto& a : doc["annotations"]) {
    if (a.contains("image_id")) {
      by_image[a["image_id"].get<std::int64_t>()].push_back(&a);
    }
  }
  std::vector<const json*> images;
  for (const auto& im : doc["images"]) {
    images.push_back(&im);
  }
  std::sort(images.begin(), images.end(),
            [](const json* a, const json* b) { return a->at("id").get<std::int64_t>() < b->at("id").get<std::int64_t>(); });

  std::size_t visited = 0;
  for (const json* im : images) {
    if (options.limit != 0 && dataset.samples.size() >= options.limit) {
      break;
    }
    ++visited;
    const auto file = im->value("file_name", std::string{});
    auto skip = [&](const std::string& why) {
      log::warn("skipping scene '" + file + "': " + why);
      ++dataset.skipped;
    };
    const auto rgb = read_rgb8(options.image_dir / file);
    if (rgb.empty()) {
      skip("unreadable image");
      continue;
    }
    const cv::Size source = rgb.size();
    const double pixels = static_cast<double>(source.area());

    struct Candidate {
      std::int64_t category;
      BoundingBox box;
      cv::Mat full;
      int area;
    };
    std::vector<Candidate> candidates;
    std::string problem;
    for (const json* a : by_image[im->at("id").get<std::int64_t>()]) {
      if (a->value("iscrowd", 0) != 0 || !a->contains("segmentation") || !(*a)["segmentation"].is_array()) {
        continue;  // crowd / RLE instances carry no polygons
      }
      const auto cat = a->value("category_id", std::int64_t{-1});
      if (!name_of.contains(cat)) {
        problem = "unknown category id " + std::to_string(cat);
        break;
      }
      std::vector<std::vector<cv::Point2f>> polygons;
      for (const auto& poly : (*a)["segmentation"]) {
        if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0) {
          problem = "malformed polygon";
          break;
        }
        std::vector<cv::Point2f> pts;
        for (std::size_t k = 0; k < poly.size(); k += 2) {
          if (!poly[k].is_number() || !poly[k + 1].is_number()) {
            problem = "non-numeric polygon coordinate";
            break;
          }
          pts.emplace_back(poly[k].get<float>(), poly[k + 1].get<float>());
        }
        polygons.push_back(std::move(pts));
      }
      if (!problem.empty()) {
        break;
      }
      auto full = draw_polygons(polygons, source);
      const int area = cv::countNonZero(full);
      if (area < options.min_area_fraction * pixels) {
        continue;
      }
      const cv::Rect r = cv::boundingRect(full);
      const BoundingBox box{static_cast<double>(r.x) / source.width, static_cast<double>(r.y) / source.height,
                            static_cast<double>(r.x + r.width) / source.width,
                            static_cast<double>(r.y + r.height) / source.height};
      candidates.push_back({dataset.vocabulary.id(name_of[cat]), box, full, area});
    }
    if (!problem.empty()) {
      skip(problem);
      continue;
    }
    if (candidates.empty()) {
      log::debug("scene '" + file + "' has no usable objects");
      continue;
    }
    // Keep the largest instances, then restore annotation order.
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].area > candidates[b].area; });
    order.resize(std::min(order.size(), options.max_objects));
    std::sort(order.begin(), order.end());

    SceneSample sample;
    sample.name = file;
    sample.image = rgb8_to_tensor(resize_to(rgb, static_cast<int>(kCanvasSize)));
    for (auto i : order) {
      const auto& c = candidates[i];
      sample.objects.push_back({c.category, c.box, binary_mask_32(c.full(source_rect(c.box, source))), {}});
    }
    refresh_crops(sample);
    dataset.samples.push_back(std::move(sample));
  }
  if (visited > 0 && static_cast<double>(dataset.skipped) > options.max_skip_rate * static_cast<double>(visited)) {
    throw IoError("skipped " + std::to_string(dataset.skipped) + " of " + std::to_string(visited) +
                  " scenes, above the allowed rate");
  }
  return dataset;
}

std::vector<torch::Tensor> ingest_book_covers(const std::filesystem::path& dir, std::size_t limit) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IoError("cover directory '" + dir.string() + "' does not exist");
  }
  static const std::set<std::string> kExtensions = {".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && kExtensions.contains(ext)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<torch::Tensor> covers;
  for (const auto& f : files) {
    if (limit != 0 && covers.size() >= limit) {
      break;
    }
    auto rgb = read_rgb8(f);
    if (rgb.empty()) {
      log::warn("skipping unreadable cover '" + f.string() + "'");
      continue;
    }
    covers.push_back(rgb8_to_tensor(resize_to(rgb, static_cast<int>(kCanvasSize))));
  }
  return covers;
}

// ---------------------------------------------------------------------------

LocationVector location_from_box(const BoundingBox& box) {
  const int col = std::clamp(static_cast<int>(std::floor(box.center_x() * kGridSide)), 0, kGridSide - 1);
  const int row = std::clamp(static_cast<int>(std::floor(box.center_y() * kGridSide)), 0, kGridSide - 1);
  const double side = std::sqrt(std::max(box.area(), 0.0));
  const int size = std::clamp(static_cast<int>(std::ceil(kSizeLevels * side - 1e-9)), 1, kSizeLevels);
  return {row * kGridSide + col, size};
}

Predicate relation_from_boxes(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  if (inter >= 0.9 * b.area() && a.area() >= b.area()) {
    return Predicate::surrounding;
  }
  if (inter >= 0.9 * a.area()) {
    return Predicate::inside;
  }
  const double dx = b.center_x() - a.center_x();
  const double dy = b.center_y() - a.center_y();
  if (std::abs(dx) >= std::abs(dy)) {
    return dx > 0 ? Predicate::left_of : Predicate::right_of;
  }
  return dy > 0 ? Predicate::above : Predicate::below;
}

LayoutGraph graph_from_objects(const std::vector<SceneObject>& objects, const CategoryVocabulary& vocabulary,
                               const std::optional<std::string>& title_text) {
  LayoutGraph graph;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    LayoutObject o;
    o.id = "o" + std::to_string(i);
    o.category = vocabulary.name(objects[i].category);
    o.location = location_from_box(objects[i].box);
    if (objects[i].category == vocabulary.title_id()) {
      o.title_text = title_text.value_or(std::string(kPlaceholderTitle));
    }
    graph.objects.push_back(std::move(o));
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      graph.relations.push_back(
          {graph.objects[i].id, relation_from_boxes(objects[i].box, objects[j].box), graph.objects[j].id});
    }
  }
  return graph;
}

torch::Tensor cut_solid_patch(const std::vector<torch::Tensor>& covers, std::mt19937_64& rng, int attempts,
                              int min_side, int max_side) {
  if (covers.empty()) {
    throw ConfigError("solid regions need a non-empty cover corpus");
  }
  std::uniform_int_distribution<std::size_t> pick(0, covers.size() - 1);
  const auto& cover = covers[pick(rng)];
  const int h = static_cast<int>(cover.size(1));
  const int w = static_cast<int>(cover.size(2));
  std::uniform_int_distribution<int> side(min_side, std::min({max_side, h, w}));
  torch::Tensor best;
  double best_std = std::numeric_limits<double>::infinity();
  for (int k = 0; k < std::max(attempts, 1); ++k) {
    const int ph = side(rng), pw = side(rng);
    std::uniform_int_distribution<int> ux(0, w - pw), uy(0, h - ph);
    const int x = ux(rng), y = uy(rng);
    auto window = cover.slice(1, y, y + ph).slice(2, x, x + pw);
    const double s = window.reshape({3, -1}).std(1).max().item<double>();
    if (s < best_std) {
      best_std = s;
      best = window;
    }
  }
  return best.clone();
}

AugmentedSample augment_sample(const SceneSample& sample, const std::vector<torch::Tensor>& covers,
                               const CategoryVocabulary& vocabulary, std::mt19937_64& rng,
                               const AugmentOptions& options) {
  AugmentedSample out;
  out.scene.name = sample.name;
  out.scene.image = sample.image.clone();
  out.scene.objects = sample.objects;

  std::uniform_int_distribution<int> solid_count(0, std::max(options.max_solids, 0));
  const int solids = solid_count(rng);
  for (int s = 0; s < solids; ++s) {
    auto patch = cut_solid_patch(covers, rng, options.solid_window_attempts, 12, 40);
    const auto rect = random_rect(rng, 0.15, 0.45, 0.15, 0.45);
    auto resized = F::interpolate(patch.unsqueeze(0), F::InterpolateFuncOptions()
                                                          .size(std::vector<std::int64_t>{rect.height(), rect.width()})
                                                          .mode(torch::kBilinear)
                                                          .align_corners(false))
                       .squeeze(0);
    if (resized.reshape({3, -1}).std(1).max().item<double>() > options.solid_std_threshold) {
      log::debug("no uniform window found for a solid region");
      continue;
    }
    out.scene.image.slice(1, rect.y0, rect.y1).slice(2, rect.x0, rect.x1).copy_(resized);
    out.scene.objects.push_back(
        {vocabulary.solid_id(), box_of_rect(rect, kCanvasSize), torch::ones({kMaskSize, kMaskSize}), {}});
  }

  const auto rect = random_rect(rng, 0.45, 0.9, 0.1, 0.2);
  std::uniform_int_distribution<std::size_t> font(0, title_font_count() - 1);
  out.title = {box_of_rect(rect, kCanvasSize), font(rng), random_title_color(rng), std::string(kPlaceholderTitle)};
  auto region = out.scene.image.slice(1, rect.y0, rect.y1).slice(2, rect.x0, rect.x1);
  const auto drawn = render_placeholder(tensor_to_rgb8(region), out.title.text, out.title.font, out.title.color);
  region.copy_(rgb8_to_tensor(drawn));
  auto coverage = render_text_coverage(out.title.text, out.title.font, static_cast<int>(rect.width()),
                                       static_cast<int>(rect.height()));
  cv::Mat coverage_small;
  cv::resize(coverage, coverage_small, cv::Size(kMaskSize, kMaskSize), 0, 0, cv::INTER_AREA);
  auto title_mask = (torch::from_blob(coverage_small.data, {kMaskSize, kMaskSize}, torch::kUInt8).clone() >= 32)
                        .to(torch::kFloat32);
  out.scene.objects.push_back({vocabulary.title_id(), out.title.box, title_mask, {}});

  refresh_crops(out.scene);
  out.graph = graph_from_objects(out.scene.objects, vocabulary, out.title.text);
  if (options.relation_keep < 1.0) {
    std::bernoulli_distribution keep(std::max(options.relation_keep, 0.0));
    std::vector<Relation> kept;
    for (const auto& r : out.graph.relations) {
      if (keep(rng)) {
        kept.push_back(r);
      }
    }
    out.graph.relations = std::move(kept);
  }
  return out;
}

ObjectAttributes attributes_of(const std::vector<SceneObject>& objects) {
  std::vector<torch::Tensor> masks, crops;
  for (const auto& o : objects) {
    masks.push_back(o.mask);
    crops.push_back(o.crop);
  }
  return {boxes_tensor(objects), torch::stack(masks), torch::stack(crops)};
}

ObjectAttributes mismatched_attributes(const std::vector<AugmentedSample>& corpus,
                                       const std::vector<std::size_t>& batch, std::mt19937_64& rng) {
  std::vector<torch::Tensor> boxes, masks, crops;
  auto take = [&](const SceneObject& o) {
    boxes.push_back(box_to_tensor(o.box));
    masks.push_back(o.mask);
    crops.push_back(o.crop);
  };
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& sample = corpus.at(batch[bi]);
    const auto key = category_key(sample);

    std::vector<std::size_t> partners;
    for (std::size_t t = 0; t < corpus.size(); ++t) {
      if (t != batch[bi] && category_key(corpus[t]) == key) {
        partners.push_back(t);
      }
    }
    if (!partners.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, partners.size() - 1);
      const auto& donor = corpus[partners[pick(rng)]].scene.objects;
      // Pair the k-th object of a category with the donor's k-th of that category.
      std::map<std::int64_t, std::size_t> used;
      for (const auto& o : sample.scene.objects) {
        std::size_t seen = 0;
        for (const auto& d : donor) {
          if (d.category == o.category && seen++ == used[o.category]) {
            take(d);
            break;
          }
        }
        ++used[o.category];
      }
      continue;
    }

    std::vector<const SceneObject*> pool;
    for (std::size_t step = 1; step < batch.size(); ++step) {
      for (const auto& o : corpus.at(batch[(bi + step) % batch.size()]).scene.objects) {
        pool.push_back(&o);
      }
    }
    if (!pool.empty()) {
      std::vector<bool> used(pool.size(), false);
      std::size_t cursor = 0;
      for (const auto& o : sample.scene.objects) {
        std::optional<std::size_t> chosen;
        for (std::size_t k = 0; k < pool.size() && !chosen; ++k) {
          if (!used[k] && pool[k]->category == o.category) {
            chosen = k;
          }
        }
        if (!chosen) {
          chosen = cursor++ % pool.size();
        }
        used[*chosen] = true;
        take(*pool[*chosen]);
      }
      continue;
    }

    for (const auto& o : sample.scene.objects) {
      SceneObject mirrored = o;
      mirrored.box = {1.0 - o.box.x1, o.box.y0, 1.0 - o.box.x0, o.box.y1};
      mirrored.mask = o.mask.flip({1});
      mirrored.crop = o.crop.flip({2});
      take(mirrored);
    }
  }
  return {torch::stack(boxes), torch::stack(masks), torch::stack(crops)};
}

TrainingBatch make_batch(const std::vector<AugmentedSample>& corpus, const std::vector<std::size_t>& indices,
                         const std::vector<torch::Tensor>& covers, const CategoryVocabulary& vocabulary,
                         std::mt19937_64& rng) {
  if (indices.empty()) {
    throw ConfigError("a batch needs at least one sample");
  }
  if (covers.empty()) {
    throw ConfigError("a batch needs a non-empty cover corpus");
  }
  TrainingBatch batch;
  batch.batch_size = static_cast<std::int64_t>(indices.size());
  std::vector<GraphTensors> graphs;
  std::vector<torch::Tensor> images, boxes, masks, crops, book;
  std::uniform_int_distribution<std::size_t> pick(0, covers.size() - 1);
  for (auto i : indices) {
    const auto& s = corpus.at(i);
    graphs.push_back(to_graph_tensors(s.graph, vocabulary));
    images.push_back(s.scene.image);
    auto attrs = attributes_of(s.scene.objects);
    boxes.push_back(attrs.boxes);
    masks.push_back(attrs.masks);
    crops.push_back(attrs.crops);
    book.push_back(covers[pick(rng)]);
  }
  batch.graphs = batch_graph_tensors(graphs);
  batch.real_images = torch::stack(images);
  batch.gt_boxes = torch::cat(boxes);
  batch.gt_masks = torch::cat(masks);
  batch.real_crops = torch::cat(crops);
  batch.object_to_sample = batch.graphs.object_to_graph;
  batch.mismatch = mismatched_attributes(corpus, indices, rng);
  batch.book_covers = torch::stack(book);
  return batch;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t corpus_size,
                                       std::size_t batch_size) {
  if (corpus_size == 0) {
    throw ConfigError("cannot draw a batch from an empty corpus");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> out;
  if (batch_size <= corpus_size) {
    std::vector<std::size_t> all(corpus_size);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, corpus_size - 1);
      std::swap(all[i], all[pick(rng)]);
      out.push_back(all[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, corpus_size - 1);
    for (std::size_t i = 0; i < batch_size; ++i) {
      out.push_back(pick(rng));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

struct Painter {
  std::mt19937_64& rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  cv::Scalar jitter(cv::Scalar base, double amount) {
    return {std::clamp(base[0] + uniform(-amount, amount), 0.0, 255.0),
            std::clamp(base[1] + uniform(-amount, amount), 0.0, 255.0),
            std::clamp(base[2] + uniform(-amount, amount), 0.0, 255.0)};
  }
};

json polygon_json(const std::vector<cv::Point2f>& pts) {
  json flat = json::array();
  for (const auto& p : pts) {
    flat.push_back(std::round(p.x * 100.0) / 100.0);
    flat.push_back(std::round(p.y * 100.0) / 100.0);
  }
  return flat;
}

std::vector<cv::Point2f> ellipse_polygon(cv::Point2f c, float rx, float ry, int n = 24) {
  std::vector<cv::Point2f> pts;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * M_PI * i / n;
    pts.emplace_back(c.x + rx * static_cast<float>(std::cos(t)), c.y + ry * static_cast<float>(std::sin(t)));
  }
  return pts;
}

}  // namespace

void write_synthetic_corpus(const SyntheticCorpusOptions& options) {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(options.seed);
  Painter paint{rng};
  cv::RNG pixel_noise(options.seed ^ 0x5eed);  // not cv::theRNG(): output must depend on the seed only
  fs::create_directories(options.root / "scenes");
  fs::create_directories(options.root / "covers");

  // RGB base colours per category.
  const std::vector<std::pair<std::string, cv::Scalar>> cats = {
      {"sky", {110, 170, 235}}, {"sea", {30, 90, 170}},      {"grass", {70, 150, 60}}, {"mountain", {120, 110, 100}},
      {"tree", {30, 100, 40}},  {"sun", {250, 210, 60}},     {"building", {170, 80, 60}},
  };
  auto cat_id = [&](const std::string& name) {
    for (std::size_t i = 0; i < cats.size(); ++i) {
      if (cats[i].first == name) {
        return static_cast<int>(i + 1);
      }
    }
    return 0;
  };
  auto color_of = [&](const std::string& name) { return cats[static_cast<std::size_t>(cat_id(name) - 1)].second; };

  json doc;
  doc["images"] = json::array();
  doc["annotations"] = json::array();
  doc["categories"] = json::array();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    doc["categories"].push_back({{"id", i + 1}, {"name", cats[i].first}});
  }

  int annotation_id = 1;
  for (std::size_t n = 0; n < options.scenes; ++n) {
    const int w = paint.integer(140, 200);
    const int h = paint.integer(110, 160);
    cv::Mat img(h, w, CV_8UC3, cv::Scalar(0, 0, 0));
    std::vector<std::pair<std::string, std::vector<cv::Point2f>>> shapes;

    const float horizon = static_cast<float>(h * paint.uniform(0.45, 0.65));
    shapes.push_back({"sky", {{0, 0}, {static_cast<float>(w), 0}, {static_cast<float>(w), horizon}, {0, horizon}}});
    const std::string ground = paint.integer(0, 1) == 0 ? "sea" : "grass";
    std::vector<cv::Point2f> ground_poly = {{0, static_cast<float>(h)}, {static_cast<float>(w), static_cast<float>(h)}};
    for (int k = 8; k >= 0; --k) {
      ground_poly.emplace_back(static_cast<float>(w * k / 8.0), horizon + static_cast<float>(paint.uniform(-3, 3)));
    }
    shapes.push_back({ground, ground_poly});

    const int extras = paint.integer(1, 3);
    for (int e = 0; e < extras; ++e) {
      switch (paint.integer(0, 3)) {
        case 0: {
          const float cx = static_cast<float>(w * paint.uniform(0.2, 0.8));
          const float half = static_cast<float>(w * paint.uniform(0.15, 0.3));
          const float peak = static_cast<float>(horizon - h * paint.uniform(0.2, 0.4));
          shapes.push_back({"mountain", {{cx - half, horizon}, {cx, peak}, {cx + half, horizon}}});
          break;
        }
        case 1: {
          const cv::Point2f c(static_cast<float>(w * paint.uniform(0.15, 0.85)),
                              static_cast<float>(horizon - h * paint.uniform(0.05, 0.2)));
          shapes.push_back({"tree", ellipse_polygon(c, static_cast<float>(w * paint.uniform(0.08, 0.14)),
                                                    static_cast<float>(h * paint.uniform(0.14, 0.22)))});
          break;
        }
        case 2: {
          const cv::Point2f c(static_cast<float>(w * paint.uniform(0.15, 0.85)),
                              static_cast<float>(horizon * paint.uniform(0.2, 0.5)));
          const float r = static_cast<float>(h * paint.uniform(0.08, 0.14));
          shapes.push_back({"sun", ellipse_polygon(c, r, r)});
          break;
        }
        default: {
          const float x0 = static_cast<float>(w * paint.uniform(0.1, 0.6));
          const float bw = static_cast<float>(w * paint.uniform(0.15, 0.3));
          const float top = static_cast<float>(horizon - h * paint.uniform(0.15, 0.35));
          const float bottom = static_cast<float>(horizon + h * 0.05);
          shapes.push_back({"building", {{x0, top}, {x0 + bw, top}, {x0 + bw, bottom}, {x0, bottom}}});
        }
      }
    }

    for (const auto& [name, poly] : shapes) {
      std::vector<std::vector<cv::Point>> pts(1);
      for (const auto& p : poly) {
        pts[0].emplace_back(static_cast<int>(std::lround(p.x * 16)), static_cast<int>(std::lround(p.y * 16)));
      }
      cv::fillPoly(img, pts, paint.jitter(color_of(name), 20), cv::LINE_AA, 4);
      doc["annotations"].push_back({{"id", annotation_id++},
                                    {"image_id", n + 1},
                                    {"category_id", cat_id(name)},
                                    {"iscrowd", 0},
                                    {"segmentation", json::array({polygon_json(poly)})}});
    }
    cv::Mat noise(img.size(), CV_16SC3);
    pixel_noise.fill(noise, cv::RNG::NORMAL, 0, 6);
    cv::Mat noisy;
    img.convertTo(noisy, CV_16SC3);
    noisy += noise;
    noisy.convertTo(img, CV_8UC3);

    const std::string file = "scene_" + std::to_string(n) + ".png";
    write_png(options.root / "scenes" / file, img);
    doc["images"].push_back({{"id", n + 1}, {"file_name", file}, {"width", w}, {"height", h}});
  }
  std::ofstream(options.root / "instances.json") << doc.dump(1) << "\n";

  for (std::size_t n = 0; n < options.covers; ++n) {
    const int w = paint.integer(90, 120);
    const int h = paint.integer(130, 170);
    cv::Mat img(h, w, CV_8UC3, paint.jitter(cv::Scalar(128, 128, 128), 120));
    const int blocks = paint.integer(1, 3);
    for (int b = 0; b < blocks; ++b) {
      const int x = paint.integer(0, w / 2), y = paint.integer(0, h / 2);
      cv::rectangle(img, cv::Rect(x, y, paint.integer(w / 4, w / 2), paint.integer(h / 5, h / 2)),
                    paint.jitter(cv::Scalar(128, 128, 128), 120), cv::FILLED);
    }
    cv::Mat noise(img.size(), CV_16SC3);
    pixel_noise.fill(noise, cv::RNG::NORMAL, 0, 3);
    cv::Mat noisy;
    img.convertTo(noisy, CV_16SC3);
    noisy += noise;
    noisy.convertTo(img, CV_8UC3);
    write_png(options.root / "covers" / ("cover_" + std::to_string(n) + ".png"), img);
  }
}

}  // namespace covergraph
