#include <doctest.h>

#include <random>

#include "covergraph/errors.hpp"
#include "covergraph/graph_model.hpp"
#include "test_support.hpp"

using namespace covergraph;

namespace {

LayoutGraph single_sky() {
  LayoutGraph g;
  g.objects.push_back({"s", "sky", {12, 5}, AppearanceControl::random(), std::nullopt});
  return g;
}

}  // namespace

TEST_CASE("vocabulary always carries the reserved categories once") {
  CategoryVocabulary plain({"sky", "grass"});
  CHECK(plain.size() == 4);
  CHECK(plain.id("sky") == 0);
  CHECK(plain.id("solid") == 2);
  CHECK(plain.id("title") == 3);

  CategoryVocabulary with_reserved({"title", "sky"});
  CHECK(with_reserved.size() == 3);
  CHECK(with_reserved.id("title") == 0);
  CHECK(with_reserved.id("solid") == 2);

  CHECK_THROWS_AS(CategoryVocabulary({"sky", "sky"}), ValidationError);
  CHECK_THROWS_AS(plain.id("unicorn"), ValidationError);
}

TEST_CASE("encode_location corner cases") {
  auto lo = encode_location(0, 1);
  CHECK(lo.count() == 2);
  CHECK(lo.test(0));
  CHECK(lo.test(25));

  auto hi = encode_location(24, 10);
  CHECK(hi.count() == 2);
  CHECK(hi.test(24));
  CHECK(hi.test(34));

  auto mid = encode_location(12, 5);
  CHECK(mid.test(12));
  CHECK(mid.test(29));
  CHECK(mid.count() == 2);
}

TEST_CASE("location code is exhaustively invertible") {
  int checked = 0;
  for (int cell = 0; cell < kGridCells; ++cell) {
    for (int size = 1; size <= kSizeLevels; ++size) {
      auto bits = encode_location(cell, size);
      int grid_bits = 0;
      int size_bits = 0;
      for (int i = 0; i < kLocationBits; ++i) {
        if (bits.test(static_cast<std::size_t>(i))) {
          (i < kGridCells ? grid_bits : size_bits) += 1;
        }
      }
      REQUIRE(grid_bits == 1);
      REQUIRE(size_bits == 1);
      REQUIRE(decode_location(bits) == LocationVector{cell, size});
      ++checked;
    }
  }
  CHECK(checked == 250);
}

TEST_CASE("encode_location names the offending field") {
  try {
    encode_location(25, 3);
    FAIL("expected a throw");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("grid_cell") != std::string::npos);
  }
  try {
    encode_location(3, 0);
    FAIL("expected a throw");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("size") != std::string::npos);
  }
  CHECK_THROWS_AS(encode_location(-1, 3), ValidationError);
  CHECK_THROWS_AS(encode_location(3, 11), ValidationError);
}

TEST_CASE("decode_location rejects malformed segments") {
  CHECK(decode_location(LocationBits().set(0).set(25)) == LocationVector{0, 1});
  CHECK(decode_location(LocationBits().set(24).set(34)) == LocationVector{24, 10});
  CHECK_THROWS_AS(decode_location(LocationBits()), ValidationError);
  CHECK_THROWS_AS(decode_location(LocationBits().set(0)), ValidationError);
  CHECK_THROWS_AS(decode_location(LocationBits().set(0).set(1).set(25)), ValidationError);
  CHECK_THROWS_AS(decode_location(LocationBits().set(3).set(25).set(30)), ValidationError);
}

TEST_CASE("inverse_predicate pairs and involution") {
  CHECK(inverse_predicate(Predicate::right_of) == Predicate::left_of);
  CHECK(inverse_predicate(Predicate::above) == Predicate::below);
  CHECK(inverse_predicate(Predicate::surrounding) == Predicate::inside);
  for (auto p : kAllPredicates) {
    CHECK(inverse_predicate(p) != p);
    CHECK(inverse_predicate(inverse_predicate(p)) == p);
    CHECK(parse_predicate(to_string(p)) == p);
  }
  CHECK_FALSE(parse_predicate("near").has_value());
}

TEST_CASE("validate_graph") {
  const auto vocab = testing::test_vocabulary();

  SUBCASE("single object without relations is fine") { CHECK(validate_graph(single_sky(), vocab).ok()); }

  SUBCASE("dangling relation id") {
    auto g = single_sky();
    g.relations.push_back({"s", Predicate::above, "x"});
    auto report = validate_graph(g, vocab);
    CHECK(report.has("unknown object id"));
    CHECK(report.violations.size() == 1);
    CHECK(report.violations[0].path == "/relations/0/object");
  }

  SUBCASE("two titles") {
    auto g = single_sky();
    g.objects.push_back({"t1", "title", {2, 3}, {}, "A"});
    g.objects.push_back({"t2", "title", {22, 3}, {}, "B"});
    CHECK(validate_graph(g, vocab).has("multiple title objects"));
  }

  SUBCASE("every violation is reported") {
    auto g = single_sky();
    g.objects.push_back({"u", "unicorn", {0, 1}, {}, std::nullopt});
    g.objects.push_back({"t", "title", {0, 1}, {}, std::nullopt});
    g.objects.push_back({"g", "grass", {0, 1}, {}, std::string("oops")});
    g.relations.push_back({"s", Predicate::above, "g"});
    g.relations.push_back({"s", Predicate::above, "g"});
    g.relations.push_back({"s", Predicate::below, "s"});
    g.relations.push_back({"q", Predicate::below, "s"});
    auto report = validate_graph(g, vocab);
    CHECK(report.has("unknown category"));
    CHECK(report.has("title object without text"));
    CHECK(report.has("text on non-title object"));
    CHECK(report.has("duplicate relation"));
    CHECK(report.has("relation from an object to itself"));
    CHECK(report.has("unknown object id"));
    CHECK(report.violations.size() == 6);
  }

  SUBCASE("empty graph, duplicate ids, bad appearance dim") {
    CHECK(validate_graph(LayoutGraph{}, vocab).has("graph has no objects"));
    auto g = single_sky();
    g.objects.push_back({"s", "sky", {1, 1}, AppearanceControl::explicit_value({1.F, 2.F}), std::nullopt});
    auto report = validate_graph(g, vocab, 3);
    CHECK(report.has("duplicate object id"));
    CHECK(report.has("appearance vector has wrong dimension"));
  }

  SUBCASE("disconnected graphs are legal") {
    auto g = single_sky();
    g.objects.push_back({"a", "sea", {20, 4}, {}, std::nullopt});
    g.objects.push_back({"b", "tree", {21, 4}, {}, std::nullopt});
    g.relations.push_back({"a", Predicate::left_of, "b"});
    CHECK(validate_graph(g, vocab).ok());
  }
}

TEST_CASE("graph document: canonical roundtrip of a single object") {
  auto g = single_sky();
  const auto doc = serialize_graph(g);
  CHECK(doc ==
        "{\n"
        "  \"objects\": [\n"
        "    {\n"
        "      \"id\": \"s\",\n"
        "      \"category\": \"sky\",\n"
        "      \"grid_cell\": 12,\n"
        "      \"size\": 5,\n"
        "      \"appearance\": {\n"
        "        \"mode\": \"random\"\n"
        "      }\n"
        "    }\n"
        "  ],\n"
        "  \"relations\": []\n"
        "}\n");
  CHECK(parse_graph(doc) == g);
  CHECK(serialize_graph(parse_graph(doc)) == doc);

  // Key order in the input does not matter; output is canonical.
  const char* shuffled =
      R"({"relations": [], "objects": [{"size": 5, "appearance": {"mode": "random"},)"
      R"( "category": "sky", "grid_cell": 12, "id": "s"}]})";
  CHECK(serialize_graph(parse_graph(shuffled)) == doc);
}

TEST_CASE("graph document: path-qualified schema errors") {
  auto expect_path = [](const char* doc, const std::string& path) {
    try {
      parse_graph(doc);
      FAIL("expected ParseError for " << doc);
    } catch (const ParseError& e) {
      CHECK(e.path() == path);
    }
  };
  expect_path(R"({"relations": []})", "/objects");
  expect_path(R"({"objects": []})", "/relations");
  expect_path(R"({"objects": [], "relations": [], "extra": 1})", "/extra");
  expect_path(R"({"objects": [{"id": "a", "category": "sky", "grid_cell": 30, "size": 2,)"
              R"( "appearance": {"mode": "random"}}], "relations": []})",
              "/objects/0/grid_cell");
  expect_path(R"({"objects": [{"id": "a", "category": "sky", "grid_cell": 3, "size": 2,)"
              R"( "appearance": {"mode": "seed"}}], "relations": []})",
              "/objects/0/appearance/seed");
  expect_path(R"({"objects": [{"id": "a", "category": "sky", "grid_cell": 3, "size": 2,)"
              R"( "appearance": {"mode": "random"}, "colour": 1}], "relations": []})",
              "/objects/0/colour");
  expect_path(R"({"objects": [], "relations": [{"subject": "a", "predicate": "near", "object": "b"}]})",
              "/relations/0/predicate");
  expect_path("{not json", "/");
}

TEST_CASE("graph document: randomized roundtrip property") {
  const auto vocab = testing::test_vocabulary();
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const int objects = 1 + static_cast<int>(rng() % 8);
    const int relations = static_cast<int>(rng() % 13);
    auto g = testing::random_graph(rng, vocab, objects, relations);
    REQUIRE(validate_graph(g, vocab, 4).ok());
    const auto doc = serialize_graph(g);
    const auto back = parse_graph(doc);
    REQUIRE(back == g);
    REQUIRE(serialize_graph(back) == doc);
  }
  // The fixed 8-object, 12-relation shape from the contract.
  auto g = testing::random_graph(rng, vocab, 8, 12);
  CHECK(g.relations.size() == 12);
  CHECK(parse_graph(serialize_graph(g)) == g);
}
