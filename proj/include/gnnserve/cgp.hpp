#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnnserve/collectives.hpp"
#include "gnnserve/comp_graph.hpp"
#include "gnnserve/inputs.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/partial.hpp"
#include "gnnserve/policy.hpp"

namespace gnnserve {

struct CgpOptions {
  WirePrecision precision = WirePrecision::kF32;
};

/// One partial per destination of the local block, in destination order.
/// GAT needs `dst_rows` (h^(l-1) of every destination); the second moments
/// pass needs `means` (num_dst x message_dim, row-major).
std::vector<PartialAggregate> local_aggregate(const LayerSpec& layer, const LayerWeights& w,
                                              const ComputationBlock& block, const DenseMatrix& src_inputs,
                                              MergeKind kind, const DenseMatrix* dst_rows = nullptr,
                                              std::span<const double> means = {});

/// Runs one layer across the world. `dst_self` holds h^(l-1) for the
/// destinations this rank owns (other rows are ignored). Returns a
/// num_dst x out_dim matrix with the owned rows filled.
DenseMatrix execute_layer(World& world, std::size_t l, const LayerSpec& layer, const LayerWeights& w,
                          const ComputationBlock& block, const DenseMatrix& src_inputs, const DenseMatrix& dst_self,
                          const CgpOptions& options = {});

/// Chains execute_layer over a partitioned shard. Rank 0 receives the B x H
/// query embeddings in query-id order; other ranks get an empty matrix.
/// Throws InvalidArgument when shards disagree on their structure.
DenseMatrix execute_model(World& world, const ComputationGraph& shard, const ModelSpec& model,
                          const Weights& weights, const InputProvider& inputs, const CgpOptions& options = {},
                          ExecTiming* timing = nullptr);

/// Globally consistent target selection: owners publish their candidates'
/// statistics, every rank selects the same top floor(γ|R|), and the owned
/// targets are all-gathered. ORACLE is not available here.
std::vector<NodeId> select_targets_cgp(World& world, const PartitionedRequest& request, const LocalPartition& part,
                                       Policy policy, double gamma, std::uint64_t seed);

}  // namespace gnnserve
