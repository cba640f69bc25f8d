#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/partition.hpp"

namespace gnnserve {

/// Device-side feature cache filled with the highest out-degree nodes.
class FeatureCache {
 public:
  FeatureCache() = default;

  std::optional<std::span<const float>> lookup(NodeId v) const;
  bool contains(NodeId v) const { return slot_.contains(v); }
  std::size_t size() const { return ids_.size(); }
  std::uint64_t capacity_bytes() const { return capacity_; }
  std::uint64_t used_bytes() const;
  const std::vector<NodeId>& cached_ids() const { return ids_; }

  friend FeatureCache build_feature_cache(const GraphDataset&, std::uint64_t);
  friend FeatureCache build_feature_cache(const LocalPartition&, std::uint64_t);

 private:
  static FeatureCache fill(std::span<const NodeId> ids, std::span<const std::uint64_t> out_degree,
                           const DenseMatrix& rows, std::uint64_t capacity);

  std::uint64_t capacity_ = 0;
  std::vector<NodeId> ids_;
  std::unordered_map<NodeId, std::size_t> slot_;
  DenseMatrix rows_;
};

/// Cache nodes by descending out-degree (ties: ascending id) while the next
/// row still fits in `capacity_bytes`.
FeatureCache build_feature_cache(const GraphDataset& dataset, std::uint64_t capacity_bytes);

/// Same policy restricted to one partition's owned nodes.
FeatureCache build_feature_cache(const LocalPartition& part, std::uint64_t capacity_bytes);

}  // namespace gnnserve
