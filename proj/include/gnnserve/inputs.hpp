#pragma once

#include <cstdint>
#include <span>

#include "gnnserve/comp_graph.hpp"
#include "gnnserve/feature_cache.hpp"
#include "gnnserve/graph.hpp"
#include "gnnserve/partition.hpp"
#include "gnnserve/pe_store.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

struct FetchStats {
  std::uint64_t feature_rows = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t pe_rows = 0;
  std::uint64_t bytes = 0;  // bytes of rows that had to be gathered from host memory
};

/// Wall-clock split of an execution into input gathering and the rest.
struct ExecTiming {
  double gather_ms = 0.0;
  double compute_ms = 0.0;
};

/// Resolves FEATURE and PE bindings to rows.
class InputProvider {
 public:
  virtual ~InputProvider() = default;
  virtual std::span<const float> feature(NodeId v) const = 0;
  virtual std::span<const float> pe(std::size_t layer, NodeId v) const = 0;

  FetchStats& stats() const { return stats_; }

 protected:
  void count_feature(std::size_t width, bool hit) const;
  void count_pe(std::size_t width) const;

 private:
  mutable FetchStats stats_;
};

/// Whole-graph inputs: dataset features, request query features, global PEs.
class CentralInputs final : public InputProvider {
 public:
  CentralInputs(const GraphDataset& dataset, const ServingRequest& request, const PeStore* pe = nullptr,
                const FeatureCache* cache = nullptr);
  std::span<const float> feature(NodeId v) const override;
  std::span<const float> pe(std::size_t layer, NodeId v) const override;

 private:
  const GraphDataset* dataset_;
  const ServingRequest* request_;
  const PeStore* pe_;
  const FeatureCache* cache_;
};

/// One partition's inputs: owned features and PEs, assigned query features.
class LocalInputs final : public InputProvider {
 public:
  LocalInputs(const LocalPartition& part, const PartitionedRequest& request, const FeatureCache* cache = nullptr);
  std::span<const float> feature(NodeId v) const override;
  std::span<const float> pe(std::size_t layer, NodeId v) const override;

 private:
  const LocalPartition* part_;
  const PartitionedRequest* request_;
  const FeatureCache* cache_;
};

/// Rows for `ids` under `bindings`. COMPUTED rows come from `prev`, the
/// previous layer's destination outputs; `prev` may be null at layer 1.
DenseMatrix gather_inputs(std::span<const NodeId> ids, std::span<const InputBinding> bindings,
                          std::size_t width, const InputProvider& inputs, const DenseMatrix* prev);

}  // namespace gnnserve
