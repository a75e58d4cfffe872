#include "covergraph/graph_encoder.hpp"

#include <algorithm>
#include <tuple>

#include "covergraph/errors.hpp"

namespace covergraph {

torch::Tensor location_tensor(const LocationVector& location) {
  const auto bits = encode_location(location);
  auto out = torch::zeros({kLocationBits});
  auto acc = out.accessor<float, 1>();
  for (int i = 0; i < kLocationBits; ++i) {
    acc[i] = bits.test(static_cast<std::size_t>(i)) ? 1.0F : 0.0F;
  }
  return out;
}

GraphTensors to_graph_tensors(const LayoutGraph& graph, const CategoryVocabulary& vocabulary) {
  const auto report = validate_graph(graph, vocabulary);
  if (!report.ok()) {
    throw ValidationError("invalid layout graph:\n" + report.to_string());
  }
  const auto n = static_cast<std::int64_t>(graph.objects.size());
  const auto r = static_cast<std::int64_t>(graph.relations.size());
  GraphTensors out;
  out.categories = torch::empty({n}, torch::kInt64);
  out.locations = torch::empty({n, kLocationBits});
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& obj = graph.objects[static_cast<std::size_t>(i)];
    out.categories[i] = vocabulary.id(obj.category);
    out.locations[i] = location_tensor(obj.location);
  }
  // Relations are visited in (subject id, predicate, object id) order so the
  // pooled sums do not depend on the order relations or objects were listed.
  std::vector<const Relation*> ordered;
  for (const auto& rel : graph.relations) {
    ordered.push_back(&rel);
  }
  std::sort(ordered.begin(), ordered.end(), [](const Relation* a, const Relation* b) {
    return std::tie(a->subject, a->predicate, a->object) < std::tie(b->subject, b->predicate, b->object);
  });
  out.subjects = torch::empty({r}, torch::kInt64);
  out.predicates = torch::empty({r}, torch::kInt64);
  out.objects = torch::empty({r}, torch::kInt64);
  for (std::int64_t i = 0; i < r; ++i) {
    const auto& rel = *ordered[static_cast<std::size_t>(i)];
    out.subjects[i] = static_cast<std::int64_t>(*graph.index_of(rel.subject));
    out.predicates[i] = static_cast<std::int64_t>(rel.predicate);
    out.objects[i] = static_cast<std::int64_t>(*graph.index_of(rel.object));
  }
  out.object_to_graph = torch::zeros({n}, torch::kInt64);
  out.num_graphs = 1;
  return out;
}

GraphTensors batch_graph_tensors(const std::vector<GraphTensors>& graphs) {
  if (graphs.empty()) {
    throw ValidationError("cannot batch an empty list of graphs");
  }
  std::vector<torch::Tensor> cats, locs, subs, preds, objs, owner;
  std::int64_t offset = 0;
  std::int64_t graph_offset = 0;
  for (const auto& g : graphs) {
    cats.push_back(g.categories);
    locs.push_back(g.locations);
    subs.push_back(g.subjects + offset);
    preds.push_back(g.predicates);
    objs.push_back(g.objects + offset);
    owner.push_back(g.object_to_graph + graph_offset);
    offset += g.num_objects();
    graph_offset += g.num_graphs;
  }
  GraphTensors out;
  out.categories = torch::cat(cats);
  out.locations = torch::cat(locs);
  out.subjects = torch::cat(subs);
  out.predicates = torch::cat(preds);
  out.objects = torch::cat(objs);
  out.object_to_graph = torch::cat(owner);
  out.num_graphs = graph_offset;
  return out;
}

GraphEncoderImpl::GraphEncoderImpl(const GraphEncoderOptions& options) : options_(options) {
  if (options.num_categories <= 0) {
    throw ConfigError("graph encoder needs a non-empty category vocabulary");
  }
  category_table = register_module(
      "category_table", torch::nn::Embedding(options.num_categories, options.embedding_dim));
  predicate_table = register_module("predicate_table",
                                    torch::nn::Embedding(kPredicateCount, options.embedding_dim));
  edge_hidden = register_module(
      "edge_hidden", torch::nn::Linear(options.edge_input_dim(), options.hidden_dim));
  edge_output = register_module(
      "edge_output", torch::nn::Linear(options.hidden_dim, 3 * options.candidate_dim));
  isolated_projection = register_module(
      "isolated_projection", torch::nn::Linear(options.node_dim(), options.candidate_dim));
  vertex_hidden = register_module("vertex_hidden",
                                  torch::nn::Linear(options.candidate_dim, options.hidden_dim));
  vertex_output = register_module("vertex_output",
                                  torch::nn::Linear(options.hidden_dim, options.output_dim));
}

torch::Tensor GraphEncoderImpl::node_vectors(const GraphTensors& graph) {
  auto embedded = category_table->forward(graph.categories);
  return torch::cat({embedded, graph.locations.to(embedded.dtype())}, 1);
}

torch::Tensor GraphEncoderImpl::edge_inputs(const GraphTensors& graph) {
  auto nodes = node_vectors(graph);
  if (graph.num_relations() == 0) {
    return torch::empty({0, options_.edge_input_dim()}, nodes.options());
  }
  return torch::cat({nodes.index_select(0, graph.subjects),
                     predicate_table->forward(graph.predicates),
                     nodes.index_select(0, graph.objects)},
                    1);
}

EdgeCandidates GraphEncoderImpl::edge_pass(const torch::Tensor& inputs) {
  auto hidden = torch::relu(edge_hidden->forward(inputs));
  auto out = torch::relu(edge_output->forward(hidden));
  auto parts = out.split(options_.candidate_dim, 1);
  return {parts[0], parts[1], parts[2]};
}

std::pair<torch::Tensor, torch::Tensor> GraphEncoderImpl::pool_candidates(
    const GraphTensors& graph, const EdgeCandidates& candidates) {
  const auto n = graph.num_objects();
  auto pooled = torch::zeros({n, options_.candidate_dim}, candidates.subject.options());
  pooled = pooled.index_add(0, graph.subjects, candidates.subject);
  pooled = pooled.index_add(0, graph.objects, candidates.object);
  auto counts = torch::zeros({n}, candidates.subject.options());
  auto ones = torch::ones({graph.num_relations()}, candidates.subject.options());
  counts = counts.index_add(0, graph.subjects, ones).index_add(0, graph.objects, ones);
  pooled = pooled / counts.clamp_min(1.0).unsqueeze(1);
  return {pooled, counts};
}

torch::Tensor GraphEncoderImpl::isolated_candidates(const torch::Tensor& nodes) {
  return isolated_projection->forward(nodes);
}

torch::Tensor GraphEncoderImpl::vertex_pass(const torch::Tensor& pooled) {
  auto hidden = torch::relu(vertex_hidden->forward(pooled));
  return torch::relu(vertex_output->forward(hidden));
}

torch::Tensor GraphEncoderImpl::forward(const GraphTensors& graph) {
  auto nodes = node_vectors(graph);
  auto candidates = edge_pass(edge_inputs(graph));
  auto [pooled, counts] = pool_candidates(graph, candidates);

  auto isolated = counts.eq(0);
  if (isolated.any().item<bool>()) {
    auto index = isolated.nonzero().squeeze(1);
    auto projected = isolated_candidates(nodes.index_select(0, index));
    pooled = pooled.index_put({index}, projected);
  }
  return vertex_pass(pooled);
}

}  // namespace covergraph
