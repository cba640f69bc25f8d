#include "gnnserve/feature_cache.hpp"

#include <algorithm>
#include <numeric>

namespace gnnserve {

std::optional<std::span<const float>> FeatureCache::lookup(NodeId v) const {
  auto it = slot_.find(v);
  if (it == slot_.end()) return std::nullopt;
  return rows_.row(it->second);
}

std::uint64_t FeatureCache::used_bytes() const {
  return static_cast<std::uint64_t>(rows_.rows()) * rows_.cols() * sizeof(float);
}

FeatureCache FeatureCache::fill(std::span<const NodeId> ids, std::span<const std::uint64_t> out_degree,
                                const DenseMatrix& rows, std::uint64_t capacity) {
  FeatureCache cache;
  cache.capacity_ = capacity;
  const std::uint64_t row_bytes = static_cast<std::uint64_t>(rows.cols()) * sizeof(float);

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out_degree[a] != out_degree[b]) return out_degree[a] > out_degree[b];
    return ids[a] < ids[b];
  });

  std::size_t count = 0;
  if (row_bytes == 0) {
    count = order.size();
  } else {
    count = static_cast<std::size_t>(std::min<std::uint64_t>(capacity / row_bytes, order.size()));
  }
  cache.rows_ = DenseMatrix(count, rows.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const auto src = order[i];
    cache.ids_.push_back(ids[src]);
    cache.slot_.emplace(ids[src], i);
    std::copy_n(rows.row(src).begin(), rows.cols(), cache.rows_.row(i).begin());
  }
  return cache;
}

FeatureCache build_feature_cache(const GraphDataset& dataset, std::uint64_t capacity_bytes) {
  std::vector<NodeId> ids(dataset.num_nodes());
  std::iota(ids.begin(), ids.end(), NodeId{0});
  const auto deg = dataset.out_degrees();
  return FeatureCache::fill(ids, deg, dataset.features, capacity_bytes);
}

FeatureCache build_feature_cache(const LocalPartition& part, std::uint64_t capacity_bytes) {
  std::vector<std::uint64_t> deg(part.out_degree.begin(), part.out_degree.end());
  return FeatureCache::fill(part.owned, deg, part.features, capacity_bytes);
}

}  // namespace gnnserve
