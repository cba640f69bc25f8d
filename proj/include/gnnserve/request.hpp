#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gnnserve/dense.hpp"
#include "gnnserve/graph.hpp"

namespace gnnserve {

struct PartitionMap;

/// Query nodes (ids num_nodes .. num_nodes+B-1), their features, and edges
/// that touch at least one query.
struct ServingRequest {
  std::uint64_t num_nodes = 0;  // training-graph size the ids refer to
  DenseMatrix query_features;   // B x F
  std::vector<Edge> edges;

  std::size_t num_queries() const { return query_features.rows(); }
  bool is_query(NodeId v) const { return v >= num_nodes; }
  NodeId query_id(std::size_t i) const { return num_nodes + i; }
  std::vector<NodeId> query_ids() const;

  /// Throws InvalidArgument if ids are out of range, an edge touches no query,
  /// or features are not finite.
  void validate(const GraphDataset& dataset) const;
};

/// One partition's slice of a request.
struct PartitionedRequest {
  std::uint32_t partition = 0;
  std::uint64_t num_nodes = 0;
  std::uint64_t num_queries_total = 0;
  std::vector<NodeId> queries;  // assigned queries, ascending
  DenseMatrix query_features;   // rows follow `queries`
  std::vector<Edge> edges;      // request edges whose source lives here
  /// Count of request edges terminating at each node this partition owns
  /// (training nodes by hash, queries by assignment). Lets builders compute
  /// serving-graph degrees without seeing other partitions' edges.
  std::unordered_map<NodeId, std::uint32_t> request_in_degree;

  std::optional<std::size_t> query_row(NodeId q) const;
};

/// Query i goes to partition i mod P; each edge goes to the partition of its
/// source endpoint.
std::uint32_t query_partition(const ServingRequest& request, NodeId q, std::uint32_t num_partitions);
std::vector<PartitionedRequest> partition_request(const ServingRequest& request, const PartitionMap& map);

/// Request directory: `request` (text key=value: B, F, k, num_nodes),
/// `query_features.bin` (f32 LE), `query_edges.bin` (u64 LE pairs).
void save_request(const std::filesystem::path& dir, const ServingRequest& request, std::size_t k);
ServingRequest load_request(const std::filesystem::path& dir, std::size_t* k = nullptr);

}  // namespace gnnserve
