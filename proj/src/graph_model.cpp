#include "covergraph/graph_model.hpp"

#include <set>
#include <sstream>
#include <tuple>

#include "covergraph/errors.hpp"

namespace covergraph {

// ---------------------------------------------------------------------------
// CategoryVocabulary
// ---------------------------------------------------------------------------

CategoryVocabulary::CategoryVocabulary(std::vector<std::string> scene_categories) {
  for (auto& name : scene_categories) {
    if (name.empty()) {
      throw ValidationError("category names must be non-empty");
    }
    if (index_.contains(name)) {
      throw ValidationError("duplicate category '" + name + "'");
    }
    index_.emplace(name, static_cast<std::int64_t>(entries_.size()));
    entries_.push_back(std::move(name));
  }
  for (auto reserved : {kSolidCategory, kTitleCategory}) {
    if (!index_.contains(reserved)) {
      index_.emplace(std::string(reserved), static_cast<std::int64_t>(entries_.size()));
      entries_.emplace_back(reserved);
    }
  }
}

bool CategoryVocabulary::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::optional<std::int64_t> CategoryVocabulary::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::int64_t CategoryVocabulary::id(std::string_view name) const {
  auto found = find(name);
  if (!found) {
    throw ValidationError("unknown category '" + std::string(name) + "'");
  }
  return *found;
}

const std::string& CategoryVocabulary::name(std::int64_t id) const {
  if (id < 0 || id >= static_cast<std::int64_t>(entries_.size())) {
    throw ValidationError("category id " + std::to_string(id) + " out of range");
  }
  return entries_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// Location code
// ---------------------------------------------------------------------------

LocationBits encode_location(int grid_cell, int size_level) {
  if (grid_cell < 0 || grid_cell >= kGridCells) {
    throw ValidationError("grid_cell must be in [0, 24], got " + std::to_string(grid_cell));
  }
  if (size_level < 1 || size_level > kSizeLevels) {
    throw ValidationError("size must be in [1, 10], got " + std::to_string(size_level));
  }
  LocationBits bits;
  bits.set(static_cast<std::size_t>(grid_cell));
  bits.set(static_cast<std::size_t>(kGridCells + size_level - 1));
  return bits;
}

LocationVector decode_location(const LocationBits& bits) {
  int cell = -1;
  int size = -1;
  int cell_count = 0;
  int size_count = 0;
  for (int i = 0; i < kLocationBits; ++i) {
    if (!bits.test(static_cast<std::size_t>(i))) {
      continue;
    }
    if (i < kGridCells) {
      cell = i;
      ++cell_count;
    } else {
      size = i - kGridCells + 1;
      ++size_count;
    }
  }
  if (cell_count != 1) {
    throw ValidationError("malformed location: grid segment has " + std::to_string(cell_count) +
                          " bits set");
  }
  if (size_count != 1) {
    throw ValidationError("malformed location: size segment has " + std::to_string(size_count) +
                          " bits set");
  }
  return {cell, size};
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

std::string_view to_string(Predicate p) {
  switch (p) {
    case Predicate::right_of:
      return "right_of";
    case Predicate::left_of:
      return "left_of";
    case Predicate::above:
      return "above";
    case Predicate::below:
      return "below";
    case Predicate::surrounding:
      return "surrounding";
    case Predicate::inside:
      return "inside";
  }
  return "?";
}

std::optional<Predicate> parse_predicate(std::string_view text) {
  for (auto p : kAllPredicates) {
    if (to_string(p) == text) {
      return p;
    }
  }
  return std::nullopt;
}

Predicate inverse_predicate(Predicate p) {
  switch (p) {
    case Predicate::right_of:
      return Predicate::left_of;
    case Predicate::left_of:
      return Predicate::right_of;
    case Predicate::above:
      return Predicate::below;
    case Predicate::below:
      return Predicate::above;
    case Predicate::surrounding:
      return Predicate::inside;
    case Predicate::inside:
      return Predicate::surrounding;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

std::optional<std::size_t> LayoutGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> LayoutGraph::title_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].category == kTitleCategory) {
      return i;
    }
  }
  return std::nullopt;
}

bool ValidationReport::has(std::string_view message) const {
  for (const auto& v : violations) {
    if (v.message == message) {
      return true;
    }
  }
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    out << v.path << ": " << v.message << "\n";
  }
  return out.str();
}

ValidationReport validate_graph(const LayoutGraph& graph, const CategoryVocabulary& vocabulary,
                                std::optional<int> appearance_dim) {
  ValidationReport report;
  auto add = [&](std::string path, std::string message) {
    report.violations.push_back({std::move(path), std::move(message)});
  };

  if (graph.objects.empty()) {
    add("/objects", "graph has no objects");
  }

  std::set<std::string_view> ids;
  int titles = 0;
  for (std::size_t i = 0; i < graph.objects.size(); ++i) {
    const auto& obj = graph.objects[i];
    const std::string path = "/objects/" + std::to_string(i);
    if (obj.id.empty()) {
      add(path + "/id", "empty object id");
    } else if (!ids.insert(obj.id).second) {
      add(path + "/id", "duplicate object id");
    }
    if (!vocabulary.contains(obj.category)) {
      add(path + "/category", "unknown category");
    }
    if (obj.location.grid_cell < 0 || obj.location.grid_cell >= kGridCells) {
      add(path + "/grid_cell", "grid_cell out of range");
    }
    if (obj.location.size_level < 1 || obj.location.size_level > kSizeLevels) {
      add(path + "/size", "size out of range");
    }
    const bool is_title = obj.category == kTitleCategory;
    if (is_title) {
      ++titles;
      if (!obj.title_text) {
        add(path + "/text", "title object without text");
      } else if (obj.title_text->empty()) {
        add(path + "/text", "empty title text");
      }
    } else if (obj.title_text) {
      add(path + "/text", "text on non-title object");
    }
    if (obj.appearance.mode == AppearanceControl::Mode::explicit_vector && appearance_dim &&
        static_cast<int>(obj.appearance.vector.size()) != *appearance_dim) {
      add(path + "/appearance/vector", "appearance vector has wrong dimension");
    }
  }
  if (titles > 1) {
    add("/objects", "multiple title objects");
  }

  std::set<std::tuple<std::string_view, Predicate, std::string_view>> triples;
  for (std::size_t i = 0; i < graph.relations.size(); ++i) {
    const auto& rel = graph.relations[i];
    const std::string path = "/relations/" + std::to_string(i);
    if (!graph.index_of(rel.subject)) {
      add(path + "/subject", "unknown object id");
    }
    if (!graph.index_of(rel.object)) {
      add(path + "/object", "unknown object id");
    }
    if (rel.subject == rel.object) {
      add(path, "relation from an object to itself");
    }
    if (!triples.emplace(rel.subject, rel.predicate, rel.object).second) {
      add(path, "duplicate relation");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

std::string_view to_string(AppearanceControl::Mode mode) {
  switch (mode) {
    case AppearanceControl::Mode::random:
      return "random";
    case AppearanceControl::Mode::seed:
      return "seed";
    case AppearanceControl::Mode::explicit_vector:
      return "explicit";
  }
  return "random";
}

void reject_unknown_fields(const json& node, std::initializer_list<std::string_view> allowed,
                           const std::string& path) {
  for (const auto& [key, _] : node.items()) {
    bool known = false;
    for (auto name : allowed) {
      known = known || key == name;
    }
    if (!known) {
      throw ParseError(path + "/" + key, "unknown field");
    }
  }
}

const json& require(const json& node, const char* key, const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) {
    throw ParseError(path + "/" + key, "missing required field");
  }
  return *it;
}

std::string require_string(const json& node, const char* key, const std::string& path) {
  const auto& value = require(node, key, path);
  if (!value.is_string()) {
    throw ParseError(path + "/" + key, "expected a string");
  }
  return value.get<std::string>();
}

std::int64_t require_integer(const json& node, const char* key, const std::string& path) {
  const auto& value = require(node, key, path);
  if (!value.is_number_integer()) {
    throw ParseError(path + "/" + key, "expected an integer");
  }
  return value.get<std::int64_t>();
}

AppearanceControl parse_appearance(const json& node, const std::string& path) {
  if (!node.is_object()) {
    throw ParseError(path, "expected an object");
  }
  reject_unknown_fields(node, {"mode", "seed", "vector"}, path);
  const auto mode = require_string(node, "mode", path);
  AppearanceControl out;
  if (mode == "random") {
    out.mode = AppearanceControl::Mode::random;
  } else if (mode == "seed") {
    out.mode = AppearanceControl::Mode::seed;
    out.seed = require_integer(node, "seed", path);
  } else if (mode == "explicit") {
    out.mode = AppearanceControl::Mode::explicit_vector;
    const auto& vec = require(node, "vector", path);
    if (!vec.is_array()) {
      throw ParseError(path + "/vector", "expected an array of numbers");
    }
    for (std::size_t i = 0; i < vec.size(); ++i) {
      if (!vec[i].is_number()) {
        throw ParseError(path + "/vector/" + std::to_string(i), "expected a number");
      }
      out.vector.push_back(vec[i].get<float>());
    }
  } else {
    throw ParseError(path + "/mode", "expected one of random, seed, explicit");
  }
  if (out.mode != AppearanceControl::Mode::seed && node.contains("seed")) {
    throw ParseError(path + "/seed", "seed only allowed with mode \"seed\"");
  }
  if (out.mode != AppearanceControl::Mode::explicit_vector && node.contains("vector")) {
    throw ParseError(path + "/vector", "vector only allowed with mode \"explicit\"");
  }
  return out;
}

}  // namespace

nlohmann::ordered_json graph_to_json(const LayoutGraph& graph) {
  nlohmann::ordered_json doc;
  doc["objects"] = nlohmann::ordered_json::array();
  for (const auto& obj : graph.objects) {
    nlohmann::ordered_json o;
    o["id"] = obj.id;
    o["category"] = obj.category;
    o["grid_cell"] = obj.location.grid_cell;
    o["size"] = obj.location.size_level;
    nlohmann::ordered_json app;
    app["mode"] = to_string(obj.appearance.mode);
    if (obj.appearance.mode == AppearanceControl::Mode::seed) {
      app["seed"] = obj.appearance.seed;
    } else if (obj.appearance.mode == AppearanceControl::Mode::explicit_vector) {
      app["vector"] = obj.appearance.vector;
    }
    o["appearance"] = std::move(app);
    if (obj.title_text) {
      o["text"] = *obj.title_text;
    }
    doc["objects"].push_back(std::move(o));
  }
  doc["relations"] = nlohmann::ordered_json::array();
  for (const auto& rel : graph.relations) {
    nlohmann::ordered_json r;
    r["subject"] = rel.subject;
    r["predicate"] = to_string(rel.predicate);
    r["object"] = rel.object;
    doc["relations"].push_back(std::move(r));
  }
  return doc;
}

std::string serialize_graph(const LayoutGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

LayoutGraph graph_from_json(const json& doc, const std::string& base) {
  if (!doc.is_object()) {
    throw ParseError(base.empty() ? "/" : base, "expected an object");
  }
  reject_unknown_fields(doc, {"objects", "relations"}, base);
  const auto& objects = require(doc, "objects", base);
  if (!objects.is_array()) {
    throw ParseError(base + "/objects", "expected an array");
  }
  const auto& relations = require(doc, "relations", base);
  if (!relations.is_array()) {
    throw ParseError(base + "/relations", "expected an array");
  }

  LayoutGraph graph;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto path = base + "/objects/" + std::to_string(i);
    const auto& node = objects[i];
    if (!node.is_object()) {
      throw ParseError(path, "expected an object");
    }
    reject_unknown_fields(node, {"id", "category", "grid_cell", "size", "appearance", "text"}, path);
    LayoutObject obj;
    obj.id = require_string(node, "id", path);
    obj.category = require_string(node, "category", path);
    const auto cell = require_integer(node, "grid_cell", path);
    if (cell < 0 || cell >= kGridCells) {
      throw ParseError(path + "/grid_cell", "must be in [0, 24]");
    }
    const auto size = require_integer(node, "size", path);
    if (size < 1 || size > kSizeLevels) {
      throw ParseError(path + "/size", "must be in [1, 10]");
    }
    obj.location = {static_cast<int>(cell), static_cast<int>(size)};
    obj.appearance = parse_appearance(require(node, "appearance", path), path + "/appearance");
    if (node.contains("text")) {
      obj.title_text = require_string(node, "text", path);
    }
    graph.objects.push_back(std::move(obj));
  }
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const auto path = base + "/relations/" + std::to_string(i);
    const auto& node = relations[i];
    if (!node.is_object()) {
      throw ParseError(path, "expected an object");
    }
    reject_unknown_fields(node, {"subject", "predicate", "object"}, path);
    Relation rel;
    rel.subject = require_string(node, "subject", path);
    const auto predicate = require_string(node, "predicate", path);
    auto parsed = parse_predicate(predicate);
    if (!parsed) {
      throw ParseError(path + "/predicate", "unknown predicate '" + predicate + "'");
    }
    rel.predicate = *parsed;
    rel.object = require_string(node, "object", path);
    graph.relations.push_back(std::move(rel));
  }
  return graph;
}

LayoutGraph parse_graph(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("/", std::string("malformed JSON: ") + e.what());
  }
  return graph_from_json(doc);
}

}  // namespace covergraph
