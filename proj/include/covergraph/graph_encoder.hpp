#pragma once

#include <torch/torch.h>

#include <vector>

#include "covergraph/graph_model.hpp"

namespace covergraph {

/// Index form of one or more layout graphs. When several graphs are
/// batched, object indices are offset so relations stay graph-local.
struct GraphTensors {
  torch::Tensor categories;       // [O] int64
  torch::Tensor locations;        // [O, 35] float, 0/1
  torch::Tensor subjects;         // [R] int64 object index
  torch::Tensor predicates;       // [R] int64 predicate id
  torch::Tensor objects;          // [R] int64 object index
  torch::Tensor object_to_graph;  // [O] int64
  std::int64_t num_graphs = 1;

  std::int64_t num_objects() const { return categories.size(0); }
  std::int64_t num_relations() const { return subjects.size(0); }
};

/// Expects a validated graph; throws ValidationError otherwise.
GraphTensors to_graph_tensors(const LayoutGraph& graph, const CategoryVocabulary& vocabulary);
GraphTensors batch_graph_tensors(const std::vector<GraphTensors>& graphs);
torch::Tensor location_tensor(const LocationVector& location);

struct GraphEncoderOptions {
  std::int64_t num_categories = 0;
  std::int64_t embedding_dim = 128;
  std::int64_t hidden_dim = 512;
  std::int64_t candidate_dim = 384;
  std::int64_t output_dim = 128;

  std::int64_t node_dim() const { return embedding_dim + kLocationBits; }
  std::int64_t edge_input_dim() const { return 2 * node_dim() + embedding_dim; }
};

/// Output of the edge network, split into (subject candidate, new edge,
/// object candidate) segments of `candidate_dim` each.
struct EdgeCandidates {
  torch::Tensor subject;
  torch::Tensor edge;
  torch::Tensor object;
};

/// Single-round graph convolution over layout graphs.
///
/// Each relation is turned into [node(subject) | predicate | node(object)],
/// where a node is the learned category embedding followed by the 35-bit
/// location code. The edge network maps that through 512 hidden units to
/// three candidate segments; every object averages the candidates it takes
/// part in (as subject or object) and runs the vertex network to produce
/// its embedding. Objects without relations go through a learned projection
/// of their node vector instead of the average.
class GraphEncoderImpl : public torch::nn::Module {
 public:
  explicit GraphEncoderImpl(const GraphEncoderOptions& options);

  torch::Tensor node_vectors(const GraphTensors& graph);
  /// [R, edge_input_dim]; empty when the graph has no relations.
  torch::Tensor edge_inputs(const GraphTensors& graph);
  EdgeCandidates edge_pass(const torch::Tensor& edge_inputs);
  /// Mean of the candidates each object participates in, [O, candidate_dim],
  /// plus the per-object participation count.
  std::pair<torch::Tensor, torch::Tensor> pool_candidates(const GraphTensors& graph,
                                                          const EdgeCandidates& candidates);
  torch::Tensor isolated_candidates(const torch::Tensor& node_vectors);
  torch::Tensor vertex_pass(const torch::Tensor& pooled);

  /// [O, output_dim], aligned with the graph's object order.
  torch::Tensor forward(const GraphTensors& graph);

  const GraphEncoderOptions& options() const { return options_; }

  torch::nn::Embedding category_table{nullptr};
  torch::nn::Embedding predicate_table{nullptr};
  torch::nn::Linear edge_hidden{nullptr};
  torch::nn::Linear edge_output{nullptr};
  torch::nn::Linear isolated_projection{nullptr};
  torch::nn::Linear vertex_hidden{nullptr};
  torch::nn::Linear vertex_output{nullptr};

 private:
  GraphEncoderOptions options_;
};
TORCH_MODULE(GraphEncoder);

}  // namespace covergraph
