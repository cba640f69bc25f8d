#pragma once

// Small hand-built graphs and seeded random instances shared by the tests.

#include <cstdint>
#include <random>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/partition.hpp"
#include "gnnserve/request.hpp"
#include "gnnserve/workload.hpp"

namespace fixtures {

using gnnserve::DenseMatrix;
using gnnserve::Edge;
using gnnserve::GraphDataset;
using gnnserve::NodeId;
using gnnserve::ServingRequest;

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  DenseMatrix m(rows, cols);
  for (auto& x : m.data()) x = normal(rng);
  return m;
}

/// The 8-node example graph: in(0)={1,2,3}, in(2)={1,4}, in(3)={0,5,7},
/// in(7)={6}, plus a few edges among the remaining nodes.
inline GraphDataset example_graph(std::size_t feature_dim = 4) {
  const std::vector<Edge> edges = {{1, 0}, {2, 0}, {3, 0}, {1, 2}, {4, 2}, {0, 3}, {5, 3}, {7, 3},
                                   {6, 7}, {0, 1}, {5, 4}, {6, 4}, {6, 5}, {7, 6}};
  std::vector<std::uint8_t> train(8, 1), test(8, 0);
  return gnnserve::make_dataset(gnnserve::build_csr(edges, 8), random_matrix(8, feature_dim, 17), train, test);
}

/// Queries 8 and 9 with 8<->2, 8<->3, 9<->2, 9<->4, 9<->7.
inline ServingRequest example_request(std::size_t feature_dim = 4) {
  ServingRequest r;
  r.num_nodes = 8;
  r.query_features = random_matrix(2, feature_dim, 23);
  for (auto [q, u] : std::vector<std::pair<NodeId, NodeId>>{{8, 2}, {8, 3}, {9, 2}, {9, 4}, {9, 7}}) {
    r.edges.push_back({q, u});
    r.edges.push_back({u, q});
  }
  return r;
}

/// Owners: {0,2,4,6} on partition 0, {1,3,5,7} on partition 1.
inline gnnserve::PartitionMap example_map() {
  gnnserve::PartitionMap map;
  map.num_partitions = 2;
  map.owner = {0, 1, 0, 1, 0, 1, 0, 1};
  return map;
}

struct Instance {
  gnnserve::HoldoutSplit split;
  ServingRequest request;
  const GraphDataset& dataset() const { return split.serving; }
};

/// Random graph with a held-out batch of queries.
inline Instance random_instance(std::size_t n, double avg_degree, std::size_t feature_dim, std::size_t batch,
                                std::uint64_t seed) {
  Instance inst{gnnserve::split_holdout(gnnserve::gen_random_graph(n, avg_degree, feature_dim, seed), 0.5, seed),
                {}};
  inst.request = gnnserve::make_request(inst.split.pool, inst.split.serving, batch, seed);
  return inst;
}

}  // namespace fixtures
