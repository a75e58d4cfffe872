#pragma once

#include <memory>

#include "covergraph/generation.hpp"
#include "covergraph/training.hpp"
#include "training_fixture.hpp"

namespace covergraph::testing {

// A few training steps on the tiny config, so the appearance bank is filled.
inline std::shared_ptr<const InferenceModel> tiny_model(const std::filesystem::path& dir, std::uint64_t seed = 11,
                                                        int steps = 3) {
  const auto config = tiny_config(seed);
  auto data = prepare_training_data(config, dir);
  Trainer trainer(config, data.vocabulary);
  for (int s = 0; s < steps; ++s) {
    trainer.step(trainer.inputs_for_step(data, s));
  }
  return inference_model_from(trainer);
}

// The non-special category the bank has seen most often.
inline std::string busiest_category(const InferenceModel& m) {
  std::string best;
  std::int64_t best_count = -1;
  for (const auto& name : m.vocabulary.entries()) {
    if (name == kSolidCategory || name == kTitleCategory) {
      continue;
    }
    const auto c = m.bank->count(m.vocabulary.id(name));
    if (c > best_count) {
      best = name;
      best_count = c;
    }
  }
  return best;
}

inline LayoutObject make_object(std::string id, std::string category, int cell, int size,
                                AppearanceControl appearance = AppearanceControl::random()) {
  LayoutObject o;
  o.id = std::move(id);
  o.category = std::move(category);
  o.location = {cell, size};
  o.appearance = std::move(appearance);
  return o;
}

// Background object, a seeded foreground object and a title.
inline LayoutGraph cover_graph(const InferenceModel& m, bool with_title = true, std::int64_t fg_seed = 0) {
  LayoutGraph g;
  const auto fg = busiest_category(m);
  g.objects.push_back(make_object("bg", fg, 12, 9));
  g.objects.push_back(make_object("fg", fg, 17, 4, AppearanceControl::seeded(fg_seed)));
  g.relations.push_back({"fg", Predicate::inside, "bg"});
  if (with_title) {
    auto t = make_object("title", std::string(kTitleCategory), 2, 5);
    t.title_text = std::string(kPlaceholderTitle);
    g.objects.push_back(t);
    g.relations.push_back({"title", Predicate::above, "fg"});
  }
  return g;
}

}  // namespace covergraph::testing
