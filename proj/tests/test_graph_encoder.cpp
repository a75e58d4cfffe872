#include "doctest_torch.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "covergraph/graph_encoder.hpp"
#include "test_support.hpp"

using namespace covergraph;

namespace {

GraphEncoder make_encoder(const CategoryVocabulary& vocab) {
  torch::manual_seed(7);
  GraphEncoderOptions options;
  options.num_categories = static_cast<std::int64_t>(vocab.size());
  return GraphEncoder(options);
}

LayoutObject obj(std::string id, std::string category, int cell, int size) {
  return {std::move(id), std::move(category), {cell, size}, {}, std::nullopt};
}

}  // namespace

TEST_CASE("edge inputs are 454-dim concatenations") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;

  SUBCASE("two objects, one relation") {
    LayoutGraph g;
    g.objects = {obj("a", "sky", 2, 9), obj("b", "grass", 22, 8)};
    g.relations = {{"a", Predicate::above, "b"}};
    auto v = encoder->edge_inputs(to_graph_tensors(g, vocab));
    CHECK(v.sizes() == torch::IntArrayRef({1, 454}));
  }

  SUBCASE("no relations") {
    LayoutGraph g;
    g.objects = {obj("a", "sky", 2, 9)};
    auto v = encoder->edge_inputs(to_graph_tensors(g, vocab));
    CHECK(v.size(0) == 0);
    CHECK(v.size(1) == 454);
  }

  SUBCASE("hand-assembled oracle, 5 objects / 7 relations") {
    LayoutGraph g;
    g.objects = {obj("a", "sky", 0, 10), obj("b", "grass", 20, 6), obj("c", "tree", 11, 3),
                 obj("d", "solid", 4, 2), obj("e", "bear", 17, 4)};
    g.relations = {{"a", Predicate::above, "b"},   {"c", Predicate::inside, "a"},
                   {"b", Predicate::below, "a"},   {"d", Predicate::right_of, "c"},
                   {"e", Predicate::left_of, "c"}, {"a", Predicate::surrounding, "e"},
                   {"e", Predicate::below, "d"}};
    auto tensors = to_graph_tensors(g, vocab);
    auto v = encoder->edge_inputs(tensors);
    REQUIRE(v.sizes() == torch::IntArrayRef({7, 454}));

    auto table = encoder->category_table->weight;
    auto preds = encoder->predicate_table->weight;
    // Each relation must appear exactly once, in any row.
    std::vector<bool> used(7, false);
    for (const auto& rel : g.relations) {
      const auto& s = g.objects[*g.index_of(rel.subject)];
      const auto& o = g.objects[*g.index_of(rel.object)];
      std::vector<float> expected;
      auto append = [&](const torch::Tensor& t) {
        for (std::int64_t i = 0; i < t.size(0); ++i) {
          expected.push_back(t[i].item<float>());
        }
      };
      append(table[vocab.id(s.category)]);
      auto sbits = encode_location(s.location);
      for (int i = 0; i < 35; ++i) expected.push_back(sbits.test(i) ? 1.F : 0.F);
      append(preds[static_cast<int>(rel.predicate)]);
      append(table[vocab.id(o.category)]);
      auto obits = encode_location(o.location);
      for (int i = 0; i < 35; ++i) expected.push_back(obits.test(i) ? 1.F : 0.F);
      REQUIRE(expected.size() == 454);
      auto expected_t = torch::tensor(expected);

      int matches = 0;
      for (int row = 0; row < 7; ++row) {
        if (!used[row] && torch::equal(v[row], expected_t)) {
          used[row] = true;
          ++matches;
          break;
        }
      }
      CHECK(matches == 1);
    }
  }
}

TEST_CASE("edge pass dimensions and segment split") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;

  auto input = torch::randn({3, 454});
  auto parts = encoder->edge_pass(input);
  CHECK(parts.subject.sizes() == torch::IntArrayRef({3, 384}));
  CHECK(parts.edge.sizes() == torch::IntArrayRef({3, 384}));
  CHECK(parts.object.sizes() == torch::IntArrayRef({3, 384}));
  CHECK(encoder->edge_output->weight.size(0) == 1152);

  // Reference split: run the perceptron by hand and slice.
  auto hidden = torch::relu(torch::matmul(input, encoder->edge_hidden->weight.t()) + encoder->edge_hidden->bias);
  auto full = torch::relu(torch::matmul(hidden, encoder->edge_output->weight.t()) + encoder->edge_output->bias);
  CHECK(torch::allclose(parts.subject, full.slice(1, 0, 384), 1e-5, 1e-6));
  CHECK(torch::allclose(parts.edge, full.slice(1, 384, 768), 1e-5, 1e-6));
  CHECK(torch::allclose(parts.object, full.slice(1, 768, 1152), 1e-5, 1e-6));

  // One-hot probe: route hidden unit 0 to a single output unit in each segment.
  auto probe = make_encoder(vocab);
  probe->edge_hidden->weight.zero_();
  probe->edge_hidden->bias.zero_();
  probe->edge_hidden->weight[0][5] = 1.0;
  probe->edge_output->weight.zero_();
  probe->edge_output->bias.zero_();
  probe->edge_output->weight[10][0] = 1.0;   // subject segment, unit 10
  probe->edge_output->weight[384 + 20][0] = 2.0;  // edge segment, unit 20
  probe->edge_output->weight[768 + 30][0] = 3.0;  // object segment, unit 30
  auto onehot = torch::zeros({1, 454});
  onehot[0][5] = 1.0;
  auto probed = probe->edge_pass(onehot);
  CHECK(probed.subject.sum().item<float>() == 1.0F);
  CHECK(probed.subject[0][10].item<float>() == 1.0F);
  CHECK(probed.edge[0][20].item<float>() == 2.0F);
  CHECK(probed.edge.sum().item<float>() == 2.0F);
  CHECK(probed.object[0][30].item<float>() == 3.0F);
  CHECK(probed.object.sum().item<float>() == 3.0F);
}

TEST_CASE("edge pass with zero weights is zero") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;
  for (auto& p : encoder->parameters()) {
    p.zero_();
  }
  auto parts = encoder->edge_pass(torch::randn({4, 454}));
  CHECK(parts.subject.abs().sum().item<float>() == 0.0F);
  CHECK(parts.edge.abs().sum().item<float>() == 0.0F);
  CHECK(parts.object.abs().sum().item<float>() == 0.0F);
}

TEST_CASE("vertex pooling averages participating candidates") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;

  // Star graph: hub takes part in k relations, alternating subject/object role.
  for (int k = 1; k <= 5; ++k) {
    LayoutGraph g;
    g.objects.push_back(obj("hub", "sky", 12, 5));
    for (int i = 0; i < k; ++i) {
      auto id = "leaf" + std::to_string(i);
      g.objects.push_back(obj(id, "tree", i, 2));
      if (i % 2 == 0) {
        g.relations.push_back({"hub", kAllPredicates[i % 6], id});
      } else {
        g.relations.push_back({id, kAllPredicates[i % 6], "hub"});
      }
    }
    auto tensors = to_graph_tensors(g, vocab);
    auto candidates = encoder->edge_pass(encoder->edge_inputs(tensors));
    auto [pooled, counts] = encoder->pool_candidates(tensors, candidates);

    // Brute-force mean over the relation rows touching object 0.
    std::vector<float> expected(384, 0.0F);
    int touching = 0;
    for (std::int64_t r = 0; r < tensors.num_relations(); ++r) {
      if (tensors.subjects[r].item<std::int64_t>() == 0) {
        for (int j = 0; j < 384; ++j) expected[j] += candidates.subject[r][j].item<float>();
        ++touching;
      }
      if (tensors.objects[r].item<std::int64_t>() == 0) {
        for (int j = 0; j < 384; ++j) expected[j] += candidates.object[r][j].item<float>();
        ++touching;
      }
    }
    REQUIRE(touching == k);
    for (auto& x : expected) x /= static_cast<float>(k);
    CHECK(counts[0].item<float>() == static_cast<float>(k));
    CHECK(torch::allclose(pooled[0], torch::tensor(expected), 1e-5, 1e-6));

    if (k == 1) {
      // A single candidate passes through unchanged.
      auto single = tensors.subjects[0].item<std::int64_t>() == 0 ? candidates.subject[0] : candidates.object[0];
      CHECK(torch::equal(pooled[0], single));
    }

    auto m = encoder->forward(tensors);
    CHECK(m.sizes() == torch::IntArrayRef({k + 1, 128}));
  }
}

TEST_CASE("encode invariances") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(99);

  for (int trial = 0; trial < 20; ++trial) {
    auto g = testing::random_graph(rng, vocab, 6, 9);
    auto base = encoder->forward(to_graph_tensors(g, vocab));

    auto shuffled = g;
    std::shuffle(shuffled.relations.begin(), shuffled.relations.end(), rng);
    CHECK(torch::equal(encoder->forward(to_graph_tensors(shuffled, vocab)), base));

    auto permuted = g;
    std::vector<std::size_t> order(g.objects.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      permuted.objects[i] = g.objects[order[i]];
    }
    auto out = encoder->forward(to_graph_tensors(permuted, vocab));
    for (std::size_t i = 0; i < order.size(); ++i) {
      CHECK(torch::allclose(out[static_cast<std::int64_t>(i)], base[static_cast<std::int64_t>(order[i])], 1e-5, 1e-6));
    }
  }
}

TEST_CASE("isolated object goes through the fallback projection") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;
  LayoutGraph g;
  g.objects = {obj("only", "sea", 7, 3)};
  auto tensors = to_graph_tensors(g, vocab);
  auto m = encoder->forward(tensors);
  auto oracle = encoder->vertex_pass(encoder->isolated_candidates(encoder->node_vectors(tensors)));
  CHECK(m.sizes() == torch::IntArrayRef({1, 128}));
  CHECK(torch::equal(m, oracle));
}

TEST_CASE("outputs stay finite on random graphs") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const int objects = 1 + static_cast<int>(rng() % 8);
    auto g = testing::random_graph(rng, vocab, objects, static_cast<int>(rng() % 12));
    auto m = encoder->forward(to_graph_tensors(g, vocab));
    REQUIRE(m.size(0) == objects);
    REQUIRE(torch::isfinite(m).all().item<bool>());
  }
}

TEST_CASE("batched graphs encode like separate graphs") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(17);
  auto g1 = testing::random_graph(rng, vocab, 4, 5);
  auto g2 = testing::random_graph(rng, vocab, 3, 2);
  auto t1 = to_graph_tensors(g1, vocab);
  auto t2 = to_graph_tensors(g2, vocab);
  auto batched = batch_graph_tensors({t1, t2});
  CHECK(batched.num_graphs == 2);
  CHECK(batched.object_to_graph.sum().item<std::int64_t>() == 3);
  auto m = encoder->forward(batched);
  CHECK(torch::allclose(m.slice(0, 0, 4), encoder->forward(t1), 1e-5, 1e-6));
  CHECK(torch::allclose(m.slice(0, 4, 7), encoder->forward(t2), 1e-5, 1e-6));
}

TEST_CASE("every encoder parameter receives gradient") {
  const auto vocab = testing::test_vocabulary();
  auto encoder = make_encoder(vocab);
  LayoutGraph g;
  g.objects = {obj("a", "sky", 2, 9),   obj("b", "grass", 22, 8), obj("c", "tree", 11, 3),
               obj("d", "solid", 4, 2), obj("e", "bear", 17, 4),  obj("lonely", "title", 0, 2)};
  g.objects.back().title_text = "T";
  g.relations = {{"a", Predicate::right_of, "b"},    {"b", Predicate::left_of, "c"},
                 {"c", Predicate::above, "d"},       {"d", Predicate::below, "e"},
                 {"e", Predicate::surrounding, "a"}, {"a", Predicate::inside, "c"}};
  auto m = encoder->forward(to_graph_tensors(g, vocab));
  m.sum().backward();
  for (const auto& item : encoder->named_parameters()) {
    INFO(item.key());
    REQUIRE(item.value().grad().defined());
    CHECK(item.value().grad().abs().sum().item<float>() > 0.0F);
  }
}
