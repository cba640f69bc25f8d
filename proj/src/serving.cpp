#include "gnnserve/serving.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <ostream>

#include "gnnserve/forward.hpp"
#include "gnnserve/inputs.hpp"

namespace gnnserve {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

void record_shape(ServeResult& res, const ComputationGraph& g) {
  if (res.sources_per_layer.empty()) {
    res.sources_per_layer.assign(g.num_layers(), 0);
    res.edges_per_layer.assign(g.num_layers(), 0);
    res.dsts_per_layer.assign(g.num_layers(), 0);
  }
  for (std::size_t l = 1; l <= g.num_layers(); ++l) {
    res.sources_per_layer[l - 1] += g.block(l).num_src();
    res.edges_per_layer[l - 1] += g.block(l).num_edges();
    res.dsts_per_layer[l - 1] = g.block(l).num_dst();
  }
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "full") return Strategy::kFull;
  if (name == "sampled") return Strategy::kSampled;
  if (name == "srpe") return Strategy::kSrpe;
  if (name == "srpe-cgp") return Strategy::kPartitioned;
  throw InvalidArgument("unknown strategy '" + name + "'");
}

RecomputationPlan plan_targets(const GraphDataset& dataset, const ServingRequest& request, const ModelSpec& model,
                               const Weights& weights, const PeStore& pe, Policy policy, double gamma,
                               std::uint64_t seed) {
  const auto cands = find_candidates(request, dataset);
  std::vector<double> scores;
  switch (policy) {
    case Policy::kQueryEdgeRatio: scores = score_query_edge_ratio(cands); break;
    case Policy::kImportance: scores = score_importance(cands, dataset); break;
    case Policy::kRandom: scores = score_random(cands.ids, seed); break;
    case Policy::kOracle: {
      const auto full = forward_serving_graph(model, weights, dataset, request, model.num_layers() - 1);
      scores = approximation_error(full, pe, cands.ids);
      break;
    }
  }
  return select_targets(cands.ids, scores, gamma, policy, seed);
}

ServingEngine::ServingEngine(const GraphDataset& dataset, PeStore pe, ModelSpec model, Weights weights,
                             ServeConfig config)
    : dataset_(&dataset), pe_(std::move(pe)), model_(std::move(model)), weights_(std::move(weights)),
      config_(std::move(config)) {
  model_.validate();
  check_weights(model_, weights_);
  require(model_.layer(1).in_dim == dataset.feature_dim(), "serve: model input dim != dataset feature dim");
  require(config_.gamma >= 0.0 && config_.gamma <= 1.0, "serve: gamma must lie in [0, 1]");
  require(config_.num_partitions >= 1, "serve: number of partitions must be >= 1");
  require(config_.bandwidth_bytes_per_s > 0.0, "serve: bandwidth must be positive");
  const bool reuses = config_.strategy == Strategy::kSrpe || config_.strategy == Strategy::kPartitioned;
  if (reuses && model_.num_layers() >= 2)
    require(pe_.num_layers() >= model_.num_layers() - 1, "serve: strategy needs precomputed embeddings");
  if (config_.strategy == Strategy::kSampled)
    require(config_.fanouts.size() == model_.num_layers(), "serve: fanout count != number of layers");

  if (config_.strategy == Strategy::kPartitioned) {
    require(config_.policy != Policy::kOracle, "serve: the oracle policy is not available with srpe-cgp");
    partitioned_ = std::make_unique<PartitionedDataset>(
        partition_random_hash(dataset, config_.num_partitions, config_.seed));
    distribute_pe(*partitioned_, pe_);
    for (const auto& part : partitioned_->parts) part_caches_.push_back(build_feature_cache(part, config_.cache_bytes));
  } else {
    cache_ = build_feature_cache(dataset, config_.cache_bytes);
  }
}

ServeResult ServingEngine::serve(const ServingRequest& request) const {
  request.validate(*dataset_);
  auto res = config_.strategy == Strategy::kPartitioned ? serve_cgp(request) : serve_central(request);
  res.latency.transfer_ms = static_cast<double>(res.latency.fetch_bytes) / config_.bandwidth_bytes_per_s * 1e3;
  return res;
}

ServeResult ServingEngine::serve_central(const ServingRequest& request) const {
  ServeResult res;
  const auto t0 = Clock::now();
  ComputationGraph graph;
  switch (config_.strategy) {
    case Strategy::kFull: graph = build_full_k_hop(request, *dataset_, model_.num_layers()); break;
    case Strategy::kSampled: graph = build_sampled(request, *dataset_, config_.fanouts, config_.seed); break;
    case Strategy::kSrpe: {
      const auto plan = plan_targets(*dataset_, request, model_, weights_, pe_, config_.policy, config_.gamma,
                                     config_.seed);
      res.num_candidates = plan.candidates.size();
      res.targets = plan.targets;
      graph = build_srpe(request, *dataset_, &pe_, model_.num_layers(), plan.targets);
      break;
    }
    case Strategy::kPartitioned: break;
  }
  const double build_ms = ms_since(t0);
  record_shape(res, graph);

  CentralInputs inputs(*dataset_, request, &pe_, &cache_);
  ExecTiming timing;
  res.embeddings = forward_full(model_, graph, weights_, inputs, &timing);
  res.latency.fetch_ms = build_ms + timing.gather_ms;
  res.latency.compute_ms = timing.compute_ms;
  res.latency.fetch_bytes = inputs.stats().bytes;
  return res;
}

struct ServingEngine::RankRun {
  double fetch_ms = 0.0;
  double compute_ms = 0.0;
  std::uint64_t fetch_bytes = 0;
  std::vector<NodeId> targets;
  ComputationGraph graph;
  DenseMatrix output;
};

ServingEngine::RankRun ServingEngine::run_rank(World& world, const PartitionedRequest& shard) const {
  RankRun out;
  const auto& part = partitioned_->parts[world.rank()];
  const auto tb = Clock::now();
  out.targets = select_targets_cgp(world, shard, part, config_.policy, config_.gamma, config_.seed);
  out.graph = build_partitioned(shard, part, partitioned_->map, out.targets, model_.num_layers());
  const double build_ms = ms_since(tb);
  LocalInputs inputs(part, shard, &part_caches_[world.rank()]);
  ExecTiming timing;
  out.output = execute_model(world, out.graph, model_, weights_, inputs, {config_.precision}, &timing);
  out.fetch_ms = build_ms + timing.gather_ms;
  out.compute_ms = timing.compute_ms;
  out.fetch_bytes = inputs.stats().bytes;
  return out;
}

ServeResult ServingEngine::serve_cgp(const ServingRequest& request) const {
  ServeResult res;
  const auto P = config_.num_partitions;
  const auto t0 = Clock::now();
  const auto shards = partition_request(request, partitioned_->map);
  const double split_ms = ms_since(t0);

  std::vector<RankRun> outs(P);
  WorldOptions opts;
  opts.transport = config_.transport;
  res.rank_counters = run_world(P, [&](World& world) { outs[world.rank()] = run_rank(world, shards[world.rank()]); },
                                opts);

  res.embeddings = std::move(outs[0].output);
  res.targets = outs[0].targets;
  res.num_candidates = find_candidates(request, *dataset_).size();
  for (std::uint32_t r = 0; r < P; ++r) {
    res.latency.fetch_ms = std::max(res.latency.fetch_ms, outs[r].fetch_ms);
    res.latency.compute_ms = std::max(res.latency.compute_ms, outs[r].compute_ms);
    res.latency.fetch_bytes += outs[r].fetch_bytes;
    res.latency.collective_bytes += res.rank_counters[r].bytes_sent;
    record_shape(res, outs[r].graph);
  }
  res.latency.fetch_ms += split_ms;
  return res;
}

ServeResult ServingEngine::serve_rank(World& world, const ServingRequest& request) const {
  require(config_.strategy == Strategy::kPartitioned, "serve_rank: strategy must be srpe-cgp");
  require(world.size() == config_.num_partitions, "serve_rank: world size != number of partitions");
  request.validate(*dataset_);
  ServeResult res;
  const auto t0 = Clock::now();
  const auto shards = partition_request(request, partitioned_->map);
  const double split_ms = ms_since(t0);
  const auto before = world.counters().bytes_sent;
  auto out = run_rank(world, shards[world.rank()]);
  res.embeddings = std::move(out.output);
  res.targets = std::move(out.targets);
  res.num_candidates = find_candidates(request, *dataset_).size();
  res.latency.fetch_ms = split_ms + out.fetch_ms;
  res.latency.compute_ms = out.compute_ms;
  res.latency.fetch_bytes = out.fetch_bytes;
  res.latency.collective_bytes = world.counters().bytes_sent - before;
  res.latency.transfer_ms = static_cast<double>(res.latency.fetch_bytes) / config_.bandwidth_bytes_per_s * 1e3;
  res.rank_counters = {world.counters()};
  record_shape(res, out.graph);
  return res;
}

void write_metrics_header(std::ostream& os) {
  os << "request_id,strategy,B,P,fetch_ms,transfer_ms,compute_ms,fetch_bytes,collective_bytes,total_ms\n";
}

void write_metrics_line(std::ostream& os, std::uint64_t request_id, const ServeConfig& config, std::size_t batch,
                        const LatencyBreakdown& latency) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%s,%zu,%u,%.3f,%.3f,%.3f,%llu,%llu,%.3f\n",
                static_cast<unsigned long long>(request_id), to_string(config.strategy).c_str(), batch,
                config.strategy == Strategy::kPartitioned ? config.num_partitions : 1U, latency.fetch_ms,
                latency.transfer_ms, latency.compute_ms, static_cast<unsigned long long>(latency.fetch_bytes),
                static_cast<unsigned long long>(latency.collective_bytes), latency.total_ms());
  os << buf;
}

void write_embeddings_csv(std::ostream& os, const DenseMatrix& embeddings, NodeId first_query_id) {
  char buf[32];
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    os << first_query_id + r;
    for (float x : embeddings.row(r)) {
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(x));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace gnnserve
