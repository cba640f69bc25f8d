#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/partition.hpp"
#include "gnnserve/pe_store.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

enum class BindingKind : std::uint8_t { kFeature, kPe, kComputed };

/// Where a block row's layer input h^(l-1) comes from.
struct InputBinding {
  BindingKind kind = BindingKind::kFeature;
  std::uint32_t pe_layer = 0;   // kPe: which PE layer
  std::uint64_t prev_row = 0;   // kComputed: destination row of the previous block

  static InputBinding feature() { return {}; }
  static InputBinding pe(std::uint32_t layer) { return {BindingKind::kPe, layer, 0}; }
  static InputBinding computed(std::uint64_t row) { return {BindingKind::kComputed, 0, row}; }
  bool operator==(const InputBinding&) const = default;
};

/// One layer's bipartite neighborhood. Sources and destinations are listed
/// by ascending global id (query ids sit above every training id); in-edges
/// of each destination are grouped CSR-style and ordered by source id.
struct ComputationBlock {
  std::vector<NodeId> src_ids;
  std::vector<NodeId> dst_ids;
  std::vector<std::uint64_t> in_offsets{0};
  std::vector<std::uint32_t> in_src;  // local source indices
  std::vector<InputBinding> src_bindings;
  std::vector<InputBinding> dst_bindings;  // self input for the update
  std::vector<std::uint32_t> src_degree;   // serving-graph in-degree (GCN normalization)
  std::vector<std::uint32_t> dst_owner;    // partitioned shards only: rank owning each destination

  std::size_t num_src() const { return src_ids.size(); }
  std::size_t num_dst() const { return dst_ids.size(); }
  std::size_t num_edges() const { return in_src.size(); }
  std::span<const std::uint32_t> in_edges(std::size_t dst) const {
    return {in_src.data() + in_offsets[dst], in_src.data() + in_offsets[dst + 1]};
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const;  // (src, dst) local indices
  std::optional<std::size_t> dst_index(NodeId v) const;
  std::optional<std::size_t> src_index(NodeId v) const;

  void validate() const;
  bool operator==(const ComputationBlock&) const = default;
};

enum class Strategy : std::uint8_t { kFull, kSampled, kSrpe, kPartitioned };
std::string to_string(Strategy s);

struct ComputationGraph {
  std::vector<ComputationBlock> blocks;  // blocks[l - 1] feeds layer l
  std::vector<NodeId> query_ids;
  std::vector<NodeId> targets;  // SRPE / partitioned: recomputed training nodes
  Strategy strategy = Strategy::kFull;
  std::vector<std::uint32_t> fanouts;  // sampled only

  std::size_t num_layers() const { return blocks.size(); }
  const ComputationBlock& block(std::size_t l) const { return blocks.at(l - 1); }
  std::size_t total_sources() const;
  std::size_t total_edges() const;
};

/// Training graph plus a request's edges, viewed as one in-adjacency.
class ServingAdjacency {
 public:
  ServingAdjacency(const GraphDataset& dataset, const ServingRequest& request);

  std::size_t num_training() const { return num_training_; }
  std::size_t num_total() const { return num_training_ + num_queries_; }
  bool is_query(NodeId v) const { return v >= num_training_; }
  /// In-neighbors of v in ascending id order (multiplicity kept).
  std::vector<NodeId> in_neighbors(NodeId v) const;
  std::uint32_t in_degree(NodeId v) const;
  /// Request edges into v, ascending by source.
  std::span<const NodeId> request_in(NodeId v) const;

 private:
  const Csr* csr_;
  std::size_t num_training_;
  std::size_t num_queries_;
  std::vector<std::uint64_t> req_offsets_;  // over [0, num_total)
  std::vector<NodeId> req_srcs_;
};

ComputationGraph build_full_k_hop(const ServingRequest& request, const GraphDataset& dataset, std::size_t k);

/// fanouts[l - 1] caps the in-edges kept per destination in block l, so the
/// query hop uses the last entry: (15,10,5) keeps <=5 neighbors per query.
ComputationGraph build_sampled(const ServingRequest& request, const GraphDataset& dataset,
                               std::span<const std::uint32_t> fanouts, std::uint64_t seed);

/// Reuse PEs for direct neighbors; recompute `targets` through the lower
/// layers together with the queries.
ComputationGraph build_srpe(const ServingRequest& request, const GraphDataset& dataset, const PeStore* pe,
                            std::size_t k, std::span<const NodeId> targets);

/// Local shard of the SRPE graph for one partition: only edges whose source
/// is available on this partition.
ComputationGraph build_partitioned(const PartitionedRequest& request, const LocalPartition& part,
                                   const PartitionMap& map, std::span<const NodeId> targets_global,
                                   std::size_t k);

/// Stable digest of the structure every shard must agree on.
std::uint64_t structure_digest(const ComputationGraph& graph);

}  // namespace gnnserve
