#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gnnserve/cgp.hpp"
#include "gnnserve/collectives.hpp"
#include "gnnserve/comp_graph.hpp"
#include "gnnserve/feature_cache.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/partition.hpp"
#include "gnnserve/policy.hpp"

namespace gnnserve {

Strategy parse_strategy(const std::string& name);  // full | sampled | srpe | srpe-cgp

struct ServeConfig {
  Strategy strategy = Strategy::kFull;
  std::vector<std::uint32_t> fanouts;  // sampled
  std::uint64_t seed = 0;              // sampling, random policy, partitioning
  Policy policy = Policy::kQueryEdgeRatio;
  double gamma = 0.0;
  std::uint32_t num_partitions = 1;
  TransportKind transport = TransportKind::kSim;
  std::uint64_t cache_bytes = 0;
  double bandwidth_bytes_per_s = 12e9;  // simulated host-to-device copy
  WirePrecision precision = WirePrecision::kF32;
};

struct LatencyBreakdown {
  double fetch_ms = 0.0;     // graph construction + input gathering
  double transfer_ms = 0.0;  // fetch_bytes / bandwidth
  double compute_ms = 0.0;
  std::uint64_t fetch_bytes = 0;
  std::uint64_t collective_bytes = 0;

  double total_ms() const { return fetch_ms + transfer_ms + compute_ms; }
};

struct ServeResult {
  DenseMatrix embeddings;  // B x H, query order
  LatencyBreakdown latency;
  std::vector<NodeId> targets;
  std::size_t num_candidates = 0;
  std::vector<std::size_t> sources_per_layer;  // centralized graph, or summed over shards
  std::vector<std::size_t> edges_per_layer;
  std::vector<std::size_t> dsts_per_layer;
  std::vector<CommCounters> rank_counters;  // srpe-cgp only
};

/// Holds the dataset, model and PEs and serves requests under one strategy.
class ServingEngine {
 public:
  ServingEngine(const GraphDataset& dataset, PeStore pe, ModelSpec model, Weights weights, ServeConfig config);

  ServeResult serve(const ServingRequest& request) const;

  /// One rank's share of an srpe-cgp request when each rank runs in its own
  /// process. Every rank passes the full request; rank 0 returns the
  /// embeddings, the others an empty matrix. Latency covers this rank only.
  ServeResult serve_rank(World& world, const ServingRequest& request) const;

  const ServeConfig& config() const { return config_; }
  const ModelSpec& model() const { return model_; }
  const Weights& weights() const { return weights_; }
  const PeStore& pe() const { return pe_; }
  const GraphDataset& dataset() const { return *dataset_; }
  const PartitionedDataset* partitioned() const { return partitioned_.get(); }

 private:
  ServeResult serve_central(const ServingRequest& request) const;
  ServeResult serve_cgp(const ServingRequest& request) const;
  struct RankRun;
  RankRun run_rank(World& world, const PartitionedRequest& shard) const;

  const GraphDataset* dataset_;
  PeStore pe_;
  ModelSpec model_;
  Weights weights_;
  ServeConfig config_;
  FeatureCache cache_;
  std::unique_ptr<PartitionedDataset> partitioned_;
  std::vector<FeatureCache> part_caches_;
};

/// Targets for a centralized SRPE request under `policy`. ORACLE runs a
/// full serving-graph forward pass to score candidates by their PE error.
RecomputationPlan plan_targets(const GraphDataset& dataset, const ServingRequest& request, const ModelSpec& model,
                               const Weights& weights, const PeStore& pe, Policy policy, double gamma,
                               std::uint64_t seed);

/// Metrics line: id,strategy,B,P,fetch_ms,transfer_ms,compute_ms,fetch_bytes,collective_bytes,total_ms
void write_metrics_header(std::ostream& os);
void write_metrics_line(std::ostream& os, std::uint64_t request_id, const ServeConfig& config, std::size_t batch,
                        const LatencyBreakdown& latency);

/// One row per query: query id, then the embedding with %.9g.
void write_embeddings_csv(std::ostream& os, const DenseMatrix& embeddings, NodeId first_query_id);

}  // namespace gnnserve
