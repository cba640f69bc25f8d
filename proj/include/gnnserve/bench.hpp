#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "gnnserve/serving.hpp"
#include "gnnserve/workload.hpp"

namespace gnnserve {

/// residual[batch][policy][budget]: Σ over candidates of the error left
/// after recomputing the selected targets.
struct PolicyBenchResult {
  std::vector<Policy> policies;
  std::vector<double> budgets;
  std::vector<std::vector<std::vector<double>>> residual;

  double mean(std::size_t policy, std::size_t budget) const;
};

/// Per-candidate residual error for one request and one target set. Targets
/// are compared against the SRPE graph's recomputed layers, the rest against
/// their PEs. `full` is forward_serving_graph up to layer k-1.
std::vector<double> residual_errors(const GraphDataset& dataset, const ServingRequest& request,
                                    const ModelSpec& model, const Weights& weights, const PeStore& pe,
                                    std::span<const DenseMatrix> full, std::span<const NodeId> candidates,
                                    std::span<const NodeId> targets);

/// Batch b uses request seed mix64(seed, b); the RANDOM policy uses the same.
PolicyBenchResult policy_benchmark(const GraphDataset& dataset, const HoldoutPool& pool, const ModelSpec& model,
                                   const Weights& weights, const PeStore& pe, std::span<const Policy> policies,
                                   std::span<const double> budgets, std::size_t num_batches,
                                   std::size_t batch_size, std::uint64_t seed);

/// Header `policy,budget,mean_residual`, one row per cell.
void write_policy_table(std::ostream& os, const PolicyBenchResult& result);

struct LatencyRow {
  Strategy strategy = Strategy::kFull;
  std::uint64_t request_id = 0;
  std::size_t batch = 0;
  LatencyBreakdown latency;
};

std::vector<LatencyRow> latency_benchmark(const ServingEngine& engine, std::span<const ServingRequest> requests);

/// Unit-rate exponential gaps scaled by 1/rate, so one seed gives the same
/// arrival pattern at every rate.
std::vector<double> poisson_interarrivals(double rate, std::size_t count, std::uint64_t seed);

struct ThroughputResult {
  double rate = 0.0;
  double duration_s = 0.0;
  std::size_t arrived = 0;
  std::size_t completed = 0;
  double throughput = 0.0;  // completed / duration
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
};

/// FIFO single-server queue in virtual time. Request i takes
/// service_ms[i % size]; only requests finishing within the duration count.
ThroughputResult simulate_fifo(std::span<const double> service_ms, double rate, double duration_s,
                               std::uint64_t seed);

/// Measures each request's serve latency once, then simulates the queue.
ThroughputResult throughput_benchmark(const ServingEngine& engine, std::span<const ServingRequest> requests,
                                      double rate, double duration_s, std::uint64_t seed);

/// Nearest-rank percentile of unsorted values; 0 for an empty set.
double percentile(std::vector<double> values, double pct);

void write_throughput_header(std::ostream& os);
void write_throughput_line(std::ostream& os, const ThroughputResult& r);

}  // namespace gnnserve
