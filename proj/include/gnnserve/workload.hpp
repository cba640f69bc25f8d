#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

/// Configuration-model graph: Pareto(exponent) raw degrees capped at n-1 and
/// rescaled to `avg_degree`; stubs are paired at random and every pair adds
/// both directed edges (self-loops dropped, parallel edges kept). Features
/// are standard normal; 80% of nodes are training, the rest test.
GraphDataset gen_powerlaw_graph(std::size_t n, double avg_degree, double exponent, std::size_t feature_dim,
                                std::uint64_t seed);

/// round(n * avg_degree) directed edges with uniform distinct endpoints.
GraphDataset gen_random_graph(std::size_t n, double avg_degree, std::size_t feature_dim, std::uint64_t seed);

/// Held-out test nodes kept for request synthesis. Endpoint ids below
/// `num_serving` are serving-graph nodes; id num_serving + i is pool row i.
struct HoldoutPool {
  std::size_t num_serving = 0;
  std::vector<NodeId> original_ids;
  DenseMatrix features;
  std::vector<std::uint64_t> in_offsets{0};
  std::vector<NodeId> in_endpoints;   // sources of edges into each pool node
  std::vector<std::uint64_t> out_offsets{0};
  std::vector<NodeId> out_endpoints;  // destinations of edges out of each pool node

  std::size_t size() const { return original_ids.size(); }
};

struct HoldoutSplit {
  GraphDataset serving;
  HoldoutPool pool;
  std::vector<NodeId> new_id;  // original id -> serving id, or kRemoved
  static constexpr NodeId kRemoved = ~NodeId{0};
};

/// Removes round(fraction · |test|) random test nodes and every incident
/// edge; survivors are renumbered in ascending original order.
HoldoutSplit split_holdout(const GraphDataset& dataset, double fraction, std::uint64_t seed);

/// Picks `batch_size` pool nodes; query i gets id num_serving + i. For every
/// distinct surviving neighbor u both q->u and u->q are added. With
/// `query_query_edges`, neighbors among the chosen queries are linked too.
ServingRequest make_request(const HoldoutPool& pool, const GraphDataset& serving, std::size_t batch_size,
                            std::uint64_t seed, bool query_query_edges = false);

void save_pool(const std::filesystem::path& dir, const HoldoutPool& pool);
HoldoutPool load_pool(const std::filesystem::path& dir);

}  // namespace gnnserve
