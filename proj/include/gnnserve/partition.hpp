#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/pe_store.hpp"

namespace gnnserve {

struct PartitionMap {
  std::uint32_t num_partitions = 1;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> owner;  // NodeId -> partition

  std::uint32_t owner_of(NodeId v) const { return owner.at(v); }
};

/// owner(v) = mix64(v, seed) mod P.
std::uint32_t hash_owner(NodeId v, std::uint64_t seed, std::uint32_t num_partitions);

/// One partition's share of the dataset. Nodes are owned by hash; edges are
/// stored with the partition that owns their SOURCE so that messages can be
/// aggregated where the source's features and PEs live.
struct LocalPartition {
  std::uint32_t index = 0;
  std::vector<NodeId> owned;  // ascending
  DenseMatrix features;       // rows follow `owned`
  std::vector<std::uint32_t> in_degree;   // training in-degree of owned nodes
  std::vector<std::uint32_t> out_degree;  // training out-degree of owned nodes
  std::vector<double> importance;         // importance score of owned nodes
  PeStore pe;                             // rows follow `owned`

  // Source-split edges grouped by destination (destinations may be remote).
  std::vector<NodeId> edge_dsts;  // ascending, distinct
  std::vector<std::uint64_t> edge_offsets{0};
  std::vector<NodeId> edge_srcs;  // ascending within a destination

  std::optional<std::size_t> row_of(NodeId v) const;
  bool owns(NodeId v) const { return row_of(v).has_value(); }
  std::span<const NodeId> local_in_neighbors(NodeId dst) const;
  std::size_t num_local_edges() const { return edge_srcs.size(); }

  void index_rows();

 private:
  std::unordered_map<NodeId, std::size_t> row_index_;
  std::unordered_map<NodeId, std::size_t> dst_slot_;
};

struct PartitionedDataset {
  PartitionMap map;
  std::vector<LocalPartition> parts;
};

/// Random-hash partitioning. Deterministic for a fixed seed. Throws on P == 0.
PartitionedDataset partition_random_hash(const GraphDataset& dataset, std::uint32_t num_partitions,
                                         std::uint64_t seed);

/// Partition by an explicit owner table.
PartitionedDataset partition_with_map(const GraphDataset& dataset, PartitionMap map);

/// Copy each owned node's PE rows into its partition.
void distribute_pe(PartitionedDataset& partitioned, const PeStore& global);

}  // namespace gnnserve
