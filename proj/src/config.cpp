#include "covergraph/config.hpp"

#include <fstream>
#include <set>

#include "covergraph/errors.hpp"
#include "covergraph/image_io.hpp"

namespace covergraph {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Applies `fn(key, field)` to every field of a section, in a fixed order
// shared by reading and writing.
template <typename Fn>
void each_field(ModelConfig& m, Fn&& fn) {
  fn("appearance_dim", m.appearance_dim);
  fn("embedding_dim", m.embedding_dim);
  fn("gcn_hidden", m.gcn_hidden);
  fn("gcn_candidate", m.gcn_candidate);
  fn("box_hidden", m.box_hidden);
  fn("mask_channels", m.mask_channels);
  fn("noise_dim", m.noise_dim);
  fn("appearance_channels", m.appearance_channels);
  fn("appearance_hidden", m.appearance_hidden);
  fn("generator_channels", m.generator_channels);
  fn("residual_blocks", m.residual_blocks);
  fn("mask_critic_channels", m.mask_critic_channels);
  fn("layout_critic_channels", m.layout_critic_channels);
  fn("book_critic_channels", m.book_critic_channels);
  fn("object_critic_channels", m.object_critic_channels);
  fn("object_critic_hidden", m.object_critic_hidden);
  fn("perception", m.perception);
  fn("perception_divisor", m.perception_divisor);
}

template <typename Fn>
void each_field(OptimizerConfig& o, Fn&& fn) {
  fn("learning_rate", o.learning_rate);
  fn("beta1", o.beta1);
  fn("beta2", o.beta2);
  fn("batch_size", o.batch_size);
}

template <typename Fn>
void each_field(DataConfig& d, Fn&& fn) {
  fn("annotations", d.annotations);
  fn("image_dir", d.image_dir);
  fn("cover_dir", d.cover_dir);
  fn("scene_limit", d.scene_limit);
  fn("cover_limit", d.cover_limit);
  fn("synthetic_scenes", d.synthetic_scenes);
  fn("synthetic_covers", d.synthetic_covers);
  fn("max_solids", d.max_solids);
  fn("relation_keep", d.relation_keep);
}

template <typename T>
void read_value(const json& value, const std::string& path, T& out) {
  try {
    if constexpr (std::is_same_v<T, std::filesystem::path>) {
      out = value.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = value.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) {
        throw ConfigError(path + ": expected a number");
      }
      out = value.get<T>();
    } else {
      if (!value.is_number_integer()) {
        throw ConfigError(path + ": expected an integer");
      }
      if constexpr (std::is_unsigned_v<T>) {
        if (value.get<std::int64_t>() < 0) {
          throw ConfigError(path + ": must be non-negative");
        }
      }
      out = value.get<T>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <typename Section>
void read_section(const json& doc, const std::string& name, Section& section) {
  if (!doc.contains(name)) {
    return;
  }
  const auto& obj = doc[name];
  if (!obj.is_object()) {
    throw ConfigError("/" + name + ": expected an object");
  }
  std::set<std::string> known;
  each_field(section, [&](const char* key, auto& field) {
    known.insert(key);
    if (obj.contains(key)) {
      read_value(obj[key], "/" + name + "/" + key, field);
    }
  });
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      throw ConfigError("/" + name + "/" + key + ": unknown config key");
    }
  }
}

template <typename Section>
ordered_json write_section(Section section) {
  ordered_json out = ordered_json::object();
  each_field(section, [&](const char* key, auto& field) {
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, std::filesystem::path>) {
      out[key] = field.string();
    } else {
      out[key] = field;
    }
  });
  return out;
}

}  // namespace

TrainingConfig profile_config(const std::string& name) {
  TrainingConfig c;
  c.profile = name;
  if (name == "full") {
    return c;
  }
  if (name != "overfit10" && name != "smoke500") {
    throw ConfigError("unknown profile '" + name + "' (expected full, overfit10 or smoke500)");
  }
  // Desk-scale widths: same layer structure, fewer channels.
  auto& m = c.model;
  m.mask_channels = 64;
  m.appearance_channels = 16;
  m.generator_channels = 16;
  m.mask_critic_channels = 16;
  m.layout_critic_channels = 16;
  m.book_critic_channels = 16;
  m.object_critic_channels = 16;
  m.object_critic_hidden = 256;
  m.perception_divisor = 4;
  if (name == "overfit10") {
    c.iterations = 200;
    c.checkpoint_every = 100;
    c.data.scene_limit = 10;
    c.data.synthetic_scenes = 10;
  } else {
    c.iterations = 500;
    c.checkpoint_every = 250;
    c.data.synthetic_scenes = 40;
    c.data.synthetic_covers = 24;
  }
  return c;
}

TrainingConfig config_from_json(const json& doc) {
  if (!doc.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  static const std::set<std::string> kTop = {"profile",    "model",       "optimizer",      "data",
                                             "weights",    "iterations",  "checkpoint_every", "seed",
                                             "mask_form",  "mismatch_sign", "ground_truth_boxes", "threads"};
  for (const auto& [key, _] : doc.items()) {
    if (!kTop.contains(key)) {
      throw ConfigError("/" + key + ": unknown config key");
    }
  }
  auto c = profile_config(doc.value("profile", std::string("full")));
  read_section(doc, "model", c.model);
  read_section(doc, "optimizer", c.optimizer);
  read_section(doc, "data", c.data);
  if (doc.contains("weights")) {
    const auto& w = doc["weights"];
    if (!w.is_object()) {
      throw ConfigError("/weights: expected an object");
    }
    for (const auto& [key, value] : w.items()) {
      std::size_t i = 0;
      while (i < kLossTerms && kLossTermNames[i] != key) {
        ++i;
      }
      if (i == kLossTerms) {
        throw ConfigError("/weights/" + key + ": unknown loss term");
      }
      read_value(value, "/weights/" + key, c.weights[i]);
    }
  }
  if (doc.contains("iterations")) read_value(doc["iterations"], "/iterations", c.iterations);
  if (doc.contains("checkpoint_every")) read_value(doc["checkpoint_every"], "/checkpoint_every", c.checkpoint_every);
  if (doc.contains("seed")) read_value(doc["seed"], "/seed", c.seed);
  if (doc.contains("threads")) read_value(doc["threads"], "/threads", c.threads);
  if (doc.contains("ground_truth_boxes")) {
    if (!doc["ground_truth_boxes"].is_boolean()) {
      throw ConfigError("/ground_truth_boxes: expected a boolean");
    }
    c.ground_truth_boxes = doc["ground_truth_boxes"].get<bool>();
  }
  if (doc.contains("mask_form")) {
    const auto v = doc["mask_form"].is_string() ? doc["mask_form"].get<std::string>() : "";
    if (v == "least_squares") {
      c.mask_form = MaskGanForm::least_squares;
    } else if (v == "log") {
      c.mask_form = MaskGanForm::log;
    } else {
      throw ConfigError("/mask_form: expected least_squares or log");
    }
  }
  if (doc.contains("mismatch_sign")) {
    const auto v = doc["mismatch_sign"].is_string() ? doc["mismatch_sign"].get<std::string>() : "";
    if (v == "as_written") {
      c.mismatch_sign = MismatchSign::as_written;
    } else if (v == "poor_match") {
      c.mismatch_sign = MismatchSign::poor_match;
    } else {
      throw ConfigError("/mismatch_sign: expected as_written or poor_match");
    }
  }
  c.weights.validate();
  if (c.optimizer.batch_size < 1 || c.iterations < 0 || c.checkpoint_every < 1) {
    throw ConfigError("batch_size and checkpoint_every must be positive, iterations non-negative");
  }
  if (c.data.relation_keep < 0.0 || c.data.relation_keep > 1.0) {
    throw ConfigError("/data/relation_keep: must lie in [0, 1]");
  }
  return c;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config '" + path.string() + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' does not parse: " + e.what());
  }
  return config_from_json(doc);
}

ordered_json config_to_json(const TrainingConfig& config) {
  ordered_json out;
  out["profile"] = config.profile;
  out["model"] = write_section(config.model);
  out["optimizer"] = write_section(config.optimizer);
  out["data"] = write_section(config.data);
  ordered_json w = ordered_json::object();
  for (std::size_t i = 0; i < kLossTerms; ++i) {
    w[std::string(kLossTermNames[i])] = config.weights[i];
  }
  out["weights"] = w;
  out["iterations"] = config.iterations;
  out["checkpoint_every"] = config.checkpoint_every;
  out["seed"] = config.seed;
  out["mask_form"] = config.mask_form == MaskGanForm::least_squares ? "least_squares" : "log";
  out["mismatch_sign"] = config.mismatch_sign == MismatchSign::as_written ? "as_written" : "poor_match";
  out["ground_truth_boxes"] = config.ground_truth_boxes;
  out["threads"] = config.threads;
  return out;
}

std::string config_hash(const TrainingConfig& config) {
  const auto text = config_to_json(config).dump();
  return to_hex(fnv1a(text.data(), text.size()));
}

}  // namespace covergraph
