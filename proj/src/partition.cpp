#include "gnnserve/partition.hpp"

#include <algorithm>

#include "gnnserve/hash.hpp"
#include "gnnserve/policy.hpp"

namespace gnnserve {

std::uint32_t hash_owner(NodeId v, std::uint64_t seed, std::uint32_t num_partitions) {
  return static_cast<std::uint32_t>(mix64(v, seed) % num_partitions);
}

std::optional<std::size_t> LocalPartition::row_of(NodeId v) const {
  auto it = row_index_.find(v);
  if (it == row_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const NodeId> LocalPartition::local_in_neighbors(NodeId dst) const {
  auto it = dst_slot_.find(dst);
  if (it == dst_slot_.end()) return {};
  const auto s = it->second;
  return {edge_srcs.data() + edge_offsets[s], edge_srcs.data() + edge_offsets[s + 1]};
}

void LocalPartition::index_rows() {
  row_index_.clear();
  dst_slot_.clear();
  for (std::size_t i = 0; i < owned.size(); ++i) row_index_.emplace(owned[i], i);
  for (std::size_t i = 0; i < edge_dsts.size(); ++i) dst_slot_.emplace(edge_dsts[i], i);
}

PartitionedDataset partition_random_hash(const GraphDataset& dataset, std::uint32_t num_partitions,
                                         std::uint64_t seed) {
  require(num_partitions >= 1, "partition_random_hash: number of partitions must be >= 1");
  PartitionMap map;
  map.num_partitions = num_partitions;
  map.seed = seed;
  map.owner.resize(dataset.num_nodes());
  for (NodeId v = 0; v < dataset.num_nodes(); ++v) map.owner[v] = hash_owner(v, seed, num_partitions);
  return partition_with_map(dataset, std::move(map));
}

PartitionedDataset partition_with_map(const GraphDataset& dataset, PartitionMap map) {
  const auto n = dataset.num_nodes();
  const auto num_partitions = map.num_partitions;
  const auto& csr = dataset.in_csr;
  require(num_partitions >= 1, "partition: number of partitions must be >= 1");
  require(map.owner.size() == n, "partition: owner table size != num_nodes");
  for (auto o : map.owner) require(o < num_partitions, "partition: owner out of range");

  PartitionedDataset out;
  out.map = std::move(map);

  const auto importance = importance_scores(csr);
  const auto out_deg = dataset.out_degrees();
  const auto dim = dataset.feature_dim();

  out.parts.resize(num_partitions);
  for (std::uint32_t p = 0; p < num_partitions; ++p) out.parts[p].index = p;
  for (NodeId v = 0; v < n; ++v) out.parts[out.map.owner[v]].owned.push_back(v);

  for (auto& part : out.parts) {
    part.features = DenseMatrix(part.owned.size(), dim);
    part.in_degree.reserve(part.owned.size());
    for (std::size_t i = 0; i < part.owned.size(); ++i) {
      const NodeId v = part.owned[i];
      std::copy_n(dataset.features.row(v).begin(), dim, part.features.row(i).begin());
      part.in_degree.push_back(static_cast<std::uint32_t>(csr.in_degree(v)));
      part.out_degree.push_back(static_cast<std::uint32_t>(out_deg[v]));
      part.importance.push_back(importance[v]);
    }
  }

  // Walk destinations in ascending order so every partition's edge list is
  // already grouped and sorted.
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : csr.in_neighbors(v)) {
      auto& part = out.parts[out.map.owner[u]];
      if (part.edge_dsts.empty() || part.edge_dsts.back() != v) {
        part.edge_dsts.push_back(v);
        part.edge_offsets.push_back(part.edge_offsets.back());
      }
      part.edge_srcs.push_back(u);
      ++part.edge_offsets.back();
    }
  }
  for (auto& part : out.parts) part.index_rows();
  return out;
}

void distribute_pe(PartitionedDataset& partitioned, const PeStore& global) {
  for (auto& part : partitioned.parts) {
    part.pe.layers.clear();
    for (const auto& layer : global.layers) {
      require(layer.rows() == partitioned.map.owner.size(), "distribute_pe: PE rows != num_nodes");
      DenseMatrix local(part.owned.size(), layer.cols());
      for (std::size_t i = 0; i < part.owned.size(); ++i) {
        auto src = layer.row(part.owned[i]);
        std::copy(src.begin(), src.end(), local.row(i).begin());
      }
      part.pe.layers.push_back(std::move(local));
    }
  }
}

}  // namespace gnnserve
