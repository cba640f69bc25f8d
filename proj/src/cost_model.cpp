#include "gnnserve/cost_model.hpp"

#include <numeric>

#include "gnnserve/types.hpp"

namespace gnnserve {

CostModelInput cost_input_from_graph(const ComputationGraph& graph) {
  CostModelInput in;
  for (const auto& b : graph.blocks) {
    in.sources.push_back(b.num_src());
    in.destinations.push_back(b.num_dst());
    in.edges.push_back(b.num_edges());
  }
  return in;
}

CostEstimate estimate_cgp_latency(const CostModelInput& in, double bandwidth_bytes_per_s,
                                  double centralized_compute_ms) {
  require(in.machines > 0, "cost model: machine count must be positive");
  require(bandwidth_bytes_per_s > 0.0, "cost model: bandwidth must be positive");
  require(centralized_compute_ms >= 0.0, "cost model: compute time must be non-negative");
  require(!in.sources.empty(), "cost model: no layers");
  require(in.sources.size() == in.destinations.size() && in.sources.size() == in.edges.size(),
          "cost model: per-layer count lengths differ");
  require(in.row_bytes > 0 && in.feature_bytes > 0 && in.edge_bytes > 0, "cost model: byte sizes must be positive");

  CostEstimate est;
  const auto sum_d = std::accumulate(in.destinations.begin(), in.destinations.end(), std::uint64_t{0});
  const auto sum_e = std::accumulate(in.edges.begin(), in.edges.end(), std::uint64_t{0});
  est.comm_bytes = in.row_bytes * sum_d;
  est.copy_bytes = (in.feature_bytes * in.sources[0] + in.edge_bytes * sum_e) / in.machines;
  est.compute_ms = centralized_compute_ms / in.machines;
  est.comm_ms = static_cast<double>(est.comm_bytes) / bandwidth_bytes_per_s * 1e3;
  est.copy_ms = static_cast<double>(est.copy_bytes) / bandwidth_bytes_per_s * 1e3;
  return est;
}

}  // namespace gnnserve
