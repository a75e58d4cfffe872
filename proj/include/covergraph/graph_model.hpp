#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace covergraph {

inline constexpr int kGridSide = 5;
inline constexpr int kGridCells = kGridSide * kGridSide;
inline constexpr int kSizeLevels = 10;
inline constexpr int kLocationBits = kGridCells + kSizeLevels;

inline constexpr std::string_view kSolidCategory = "solid";
inline constexpr std::string_view kTitleCategory = "title";
inline constexpr std::string_view kPlaceholderTitle = "Lorem Ipsum";

// ---------------------------------------------------------------------------
// Categories
// ---------------------------------------------------------------------------

/// Dense 0-based ids for scene categories plus the reserved "solid" and
/// "title" classes, which are always present exactly once.
class CategoryVocabulary {
 public:
  CategoryVocabulary() : CategoryVocabulary(std::vector<std::string>{}) {}
  /// Throws ValidationError on duplicate or empty names. Reserved names
  /// are appended when missing.
  explicit CategoryVocabulary(std::vector<std::string> scene_categories);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  bool contains(std::string_view name) const;
  std::optional<std::int64_t> find(std::string_view name) const;
  /// Throws ValidationError for unknown names.
  std::int64_t id(std::string_view name) const;
  const std::string& name(std::int64_t id) const;

  std::int64_t solid_id() const { return id(kSolidCategory); }
  std::int64_t title_id() const { return id(kTitleCategory); }

  bool operator==(const CategoryVocabulary& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::string> entries_;
  std::map<std::string, std::int64_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Location code
// ---------------------------------------------------------------------------

/// Position on the 5x5 grid (row-major, cell 0 top-left, cell 4 top-right)
/// and a size level on the 1..10 scale.
struct LocationVector {
  int grid_cell = 0;
  int size_level = 1;

  int row() const { return grid_cell / kGridSide; }
  int column() const { return grid_cell % kGridSide; }
  bool operator==(const LocationVector&) const = default;
};

using LocationBits = std::bitset<kLocationBits>;

/// Throws ValidationError naming the offending field.
LocationBits encode_location(int grid_cell, int size_level);
inline LocationBits encode_location(const LocationVector& loc) {
  return encode_location(loc.grid_cell, loc.size_level);
}
/// Throws ValidationError when either segment does not hold exactly one bit.
LocationVector decode_location(const LocationBits& bits);

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

enum class Predicate : std::uint8_t { right_of, left_of, above, below, surrounding, inside };

inline constexpr std::array<Predicate, 6> kAllPredicates = {
    Predicate::right_of, Predicate::left_of,     Predicate::above,
    Predicate::below,    Predicate::surrounding, Predicate::inside,
};
inline constexpr int kPredicateCount = static_cast<int>(kAllPredicates.size());

std::string_view to_string(Predicate p);
std::optional<Predicate> parse_predicate(std::string_view text);
Predicate inverse_predicate(Predicate p);

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

struct AppearanceControl {
  enum class Mode : std::uint8_t { random, seed, explicit_vector };

  Mode mode = Mode::random;
  std::int64_t seed = 0;      // meaningful for Mode::seed
  std::vector<float> vector;  // meaningful for Mode::explicit_vector

  static AppearanceControl random() { return {}; }
  static AppearanceControl seeded(std::int64_t s) { return {Mode::seed, s, {}}; }
  static AppearanceControl explicit_value(std::vector<float> v) {
    return {Mode::explicit_vector, 0, std::move(v)};
  }
  bool operator==(const AppearanceControl&) const = default;
};

struct LayoutObject {
  std::string id;
  std::string category;
  LocationVector location;
  AppearanceControl appearance;
  std::optional<std::string> title_text;

  bool operator==(const LayoutObject&) const = default;
};

struct Relation {
  std::string subject;
  Predicate predicate = Predicate::right_of;
  std::string object;

  bool operator==(const Relation&) const = default;
};

struct LayoutGraph {
  std::vector<LayoutObject> objects;
  std::vector<Relation> relations;

  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Index of the (single) title object, if any.
  std::optional<std::size_t> title_index() const;
  bool operator==(const LayoutGraph&) const = default;
};

struct Violation {
  std::string path;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view message) const;
  std::string to_string() const;
};

/// Collects every violation rather than stopping at the first. When
/// `appearance_dim` is given, explicit appearance vectors must match it.
ValidationReport validate_graph(const LayoutGraph& graph, const CategoryVocabulary& vocabulary,
                                std::optional<int> appearance_dim = std::nullopt);

// ---------------------------------------------------------------------------
// Interchange document
// ---------------------------------------------------------------------------

/// Canonical UTF-8 JSON document: fixed key order, two-space indent.
std::string serialize_graph(const LayoutGraph& graph);
/// Throws ParseError carrying a JSON-pointer path on schema violations,
/// including unknown fields.
LayoutGraph parse_graph(std::string_view document);

nlohmann::ordered_json graph_to_json(const LayoutGraph& graph);
/// `base_path` prefixes error paths when the graph is embedded in a larger
/// document (e.g. "/graph").
LayoutGraph graph_from_json(const nlohmann::json& document, const std::string& base_path = "");

}  // namespace covergraph
