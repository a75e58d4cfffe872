#include "doctest_torch.hpp"

#include "composition_oracle.hpp"
#include "covergraph/errors.hpp"
#include "covergraph/object_synthesis.hpp"

using namespace covergraph;

namespace {

bool valid_boxes(const torch::Tensor& boxes) {
  auto x0 = boxes.select(1, 0), y0 = boxes.select(1, 1), x1 = boxes.select(1, 2), y1 = boxes.select(1, 3);
  return (x0 >= 0).all().item<bool>() && (y0 >= 0).all().item<bool>() && (x1 <= 1).all().item<bool>() &&
         (y1 <= 1).all().item<bool>() && (x0 < x1).all().item<bool>() && (y0 < y1).all().item<bool>();
}

}  // namespace

TEST_CASE("box normalization") {
  auto check = [](std::vector<float> raw, std::vector<float> expected) {
    auto out = normalize_boxes(torch::tensor(raw).view({1, 4}));
    CHECK(torch::allclose(out[0], torch::tensor(expected), 0, 1e-6));
  };
  check({0.2F, 0.1F, 0.8F, 0.9F}, {0.2F, 0.1F, 0.8F, 0.9F});
  check({0.8F, 0.1F, 0.2F, 0.9F}, {0.2F, 0.1F, 0.8F, 0.9F});
  check({-0.3F, 0.5F, 1.4F, 0.6F}, {0.0F, 0.5F, 1.0F, 0.6F});

  // Collapsed pairs still come out with positive extent.
  auto collapsed = normalize_boxes(torch::tensor({1.5F, 0.3F, 1.2F, 0.3F}).view({1, 4}));
  CHECK(valid_boxes(collapsed));

  torch::manual_seed(3);
  auto random = normalize_boxes(torch::randn({500, 4}) * 2);
  CHECK(valid_boxes(random));
}

TEST_CASE("box regressor always yields valid boxes") {
  torch::manual_seed(1);
  BoxRegressor head(BoxRegressorOptions{});
  CHECK(head->output->weight.size(0) == 4);
  auto boxes = head->forward(torch::randn({64, 128}) * 5);
  CHECK(boxes.sizes() == torch::IntArrayRef({64, 4}));
  CHECK(valid_boxes(boxes));
}

TEST_CASE("mask generator shape, range, determinism") {
  torch::manual_seed(2);
  MaskGenerator gen(MaskGeneratorOptions{.embedding_dim = 128, .noise_dim = 64, .channels = 16});
  gen->eval();
  torch::NoGradGuard no_grad;
  auto m = torch::randn({3, 128});
  auto z = torch::randn({3, 64});
  auto masks = gen->forward(m, z);
  CHECK(masks.sizes() == torch::IntArrayRef({3, 32, 32}));
  CHECK((masks >= 0).all().item<bool>());
  CHECK((masks <= 1).all().item<bool>());
  CHECK(torch::equal(masks, gen->forward(m, z)));

  auto other = gen->forward(m, torch::randn({3, 64}));
  CHECK((other - masks).abs().mean().item<float>() > 0.0F);

  CHECK_THROWS_AS(gen->forward(m, torch::randn({3, 10})), ShapeError);
}

TEST_CASE("mask range holds for extreme weights") {
  torch::manual_seed(4);
  MaskGenerator gen(MaskGeneratorOptions{.embedding_dim = 8, .noise_dim = 4, .channels = 8});
  torch::NoGradGuard no_grad;
  for (auto& p : gen->parameters()) {
    p.mul_(50.0);
  }
  auto masks = gen->forward(torch::randn({5, 8}) * 10, torch::randn({5, 4}));
  CHECK(torch::isfinite(masks).all().item<bool>());
  CHECK((masks >= 0).all().item<bool>());
  CHECK((masks <= 1).all().item<bool>());
}

TEST_CASE("full-width mask generator uses five 192-filter 3x3 convolutions") {
  MaskGenerator gen(MaskGeneratorOptions{});
  int convs = 0;
  for (const auto& item : gen->named_modules()) {
    if (auto* conv = item.value()->as<torch::nn::Conv2d>(); conv != nullptr && item.key().find("blocks") == 0) {
      CHECK(conv->options.out_channels() == 192);
      CHECK(conv->options.kernel_size()->at(0) == 3);
      ++convs;
    }
  }
  CHECK(convs == 5);
  torch::NoGradGuard no_grad;
  gen->eval();
  CHECK(gen->forward(torch::randn({2, 128}), torch::randn({2, 64})).sizes() == torch::IntArrayRef({2, 32, 32}));
}

TEST_CASE("appearance encoder") {
  torch::manual_seed(5);
  AppearanceEncoder enc(AppearanceEncoderOptions{.appearance_dim = 64, .base_channels = 8, .hidden_dim = 192});
  enc->eval();
  torch::NoGradGuard no_grad;
  auto crops = torch::rand({4, 3, 64, 64}) * 2 - 1;
  auto a = enc->forward(crops);
  CHECK(a.sizes() == torch::IntArrayRef({4, 64}));
  CHECK(torch::equal(a, enc->forward(crops)));
  CHECK(torch::allclose(a[0], enc->forward(crops.slice(0, 0, 1))[0], 1e-4, 1e-5));
  CHECK_THROWS_AS(enc->forward(torch::rand({1, 3, 32, 32})), ShapeError);
  CHECK_THROWS_AS(enc->forward(torch::rand({3, 64, 64})), ShapeError);

  AppearanceEncoder narrow(AppearanceEncoderOptions{.appearance_dim = 32, .base_channels = 8, .hidden_dim = 16});
  narrow->eval();
  CHECK(narrow->forward(crops).size(1) == 32);
}

TEST_CASE("compose: full-canvas unit object") {
  const int dim = 5;
  auto boxes = torch::tensor({0.0F, 0.0F, 1.0F, 1.0F}).view({1, 4});
  auto masks = torch::ones({1, 32, 32});
  auto app = torch::zeros({1, dim});
  app[0][2] = 1.0;
  auto F = compose_feature_map(boxes, masks, app);
  CHECK(F.sizes() == torch::IntArrayRef({dim + 1, 128, 128}));
  for (int c = 0; c < dim; ++c) {
    auto expected = c == 2 ? 1.0F : 0.0F;
    CHECK(torch::equal(F[c], torch::full({128, 128}, expected)));
  }
  CHECK(torch::equal(F[dim], torch::ones({128, 128})));
}

TEST_CASE("compose: disjoint and overlapping boxes match the per-pixel oracle") {
  auto gen = torch::make_generator<at::CPUGeneratorImpl>(11);
  const int dim = 3;
  auto masks = torch::rand({2, 32, 32}, gen);
  auto app = torch::randn({2, dim}, gen);

  auto disjoint = torch::tensor({0.0F, 0.0F, 0.25F, 0.5F, 0.5F, 0.5F, 1.0F, 0.875F}).view({2, 4});
  auto F = compose_feature_map(disjoint, masks, app);
  auto expected = testing::compose_oracle(testing::to_oracle_objects(disjoint, masks, app), dim, 128);
  CHECK(testing::max_abs_diff(F, expected) < 1e-5);
  // Outside both boxes everything is zero.
  CHECK(F.slice(1, 64, 128).slice(2, 0, 64).abs().sum().item<float>() == 0.0F);

  auto overlapping = torch::tensor({0.1F, 0.1F, 0.7F, 0.6F, 0.3F, 0.2F, 0.9F, 0.95F}).view({2, 4});
  auto G = compose_feature_map(overlapping, masks, app);
  auto expected2 = testing::compose_oracle(testing::to_oracle_objects(overlapping, masks, app), dim, 128);
  CHECK(testing::max_abs_diff(G, expected2) < 1e-5);
  auto first = compose_feature_map(overlapping.slice(0, 0, 1), masks.slice(0, 0, 1), app.slice(0, 0, 1));
  auto second = compose_feature_map(overlapping.slice(0, 1, 2), masks.slice(0, 1, 2), app.slice(0, 1, 2));
  CHECK(torch::allclose(G, first + second, 0, 1e-6));
}

TEST_CASE("compose: random instances match the oracle within 1e-5") {
  auto gen = torch::make_generator<at::CPUGeneratorImpl>(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 1 + trial % 6;
    const int dim = 4;
    auto boxes = testing::random_boxes(gen, n);
    auto masks = torch::rand({n, 32, 32}, gen);
    auto app = torch::randn({n, dim}, gen);
    auto F = compose_feature_map(boxes, masks, app);
    auto expected = testing::compose_oracle(testing::to_oracle_objects(boxes, masks, app), dim, 128);
    REQUIRE(testing::max_abs_diff(F, expected) < 1e-5);
  }
}

TEST_CASE("compose: integer pixel translation moves the contribution exactly") {
  auto gen = torch::make_generator<at::CPUGeneratorImpl>(8);
  auto masks = torch::rand({1, 32, 32}, gen);
  auto app = torch::randn({1, 2}, gen);
  auto box = torch::tensor({10.0F / 128, 20.0F / 128, 50.0F / 128, 47.0F / 128}).view({1, 4});
  auto moved = torch::tensor({(10.0F + 7) / 128, (20.0F + 13) / 128, (50.0F + 7) / 128, (47.0F + 13) / 128}).view({1, 4});
  auto a = compose_feature_map(box, masks, app);
  auto b = compose_feature_map(moved, masks, app);
  CHECK(torch::equal(a.slice(1, 20, 47).slice(2, 10, 50), b.slice(1, 33, 60).slice(2, 17, 57)));
  // Nothing leaks outside the rectangle.
  CHECK(b.abs().sum().item<double>() == doctest::Approx(b.slice(1, 33, 60).slice(2, 17, 57).abs().sum().item<double>()));
  CHECK(b.slice(1, 0, 33).abs().sum().item<float>() == 0.0F);
  CHECK(b.slice(2, 57, 128).abs().sum().item<float>() == 0.0F);
}

TEST_CASE("compose: sub-pixel boxes are skipped") {
  auto boxes = torch::tensor({0.5F, 0.5F, 0.502F, 0.9F}).view({1, 4});
  auto F = compose_feature_map(boxes, torch::ones({1, 32, 32}), torch::ones({1, 2}));
  CHECK(F.abs().sum().item<float>() == 0.0F);
  CHECK_THROWS_AS(compose_feature_map(boxes, torch::ones({2, 32, 32}), torch::ones({1, 2})), ShapeError);
}

TEST_CASE("compose: gradients reach masks and appearances") {
  auto masks = torch::rand({2, 32, 32}).requires_grad_(true);
  auto app = torch::randn({2, 3}).requires_grad_(true);
  auto boxes = torch::tensor({0.1F, 0.1F, 0.6F, 0.6F, 0.4F, 0.3F, 0.9F, 0.8F}).view({2, 4});
  auto owner = torch::tensor({0, 1}, torch::kInt64);
  auto F = compose_feature_maps(boxes, masks, app, owner, 2);
  CHECK(F.sizes() == torch::IntArrayRef({2, 4, 128, 128}));
  F.pow(2).sum().backward();
  CHECK(masks.grad().abs().sum().item<float>() > 0.0F);
  CHECK(app.grad().abs().sum().item<float>() > 0.0F);
}

TEST_CASE("crop_boxes resizes each box region") {
  auto images = torch::zeros({2, 3, 128, 128});
  images[1].slice(1, 32, 96).slice(2, 0, 64).fill_(0.5);
  auto boxes = torch::tensor({0.0F, 0.25F, 0.5F, 0.75F, 0.0F, 0.0F, 1.0F, 1.0F}).view({2, 4});
  auto owner = torch::tensor({1, 0}, torch::kInt64);
  auto crops = crop_boxes(images, boxes, owner);
  CHECK(crops.sizes() == torch::IntArrayRef({2, 3, 64, 64}));
  CHECK(torch::allclose(crops[0], torch::full({3, 64, 64}, 0.5F)));
  CHECK(crops[1].abs().sum().item<float>() == 0.0F);
}
