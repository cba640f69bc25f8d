#pragma once

#include <cstdint>
#include <vector>

#include "gnnserve/comp_graph.hpp"

namespace gnnserve {

/// Per-layer graph sizes and byte sizes for the analytical CGP latency model.
struct CostModelInput {
  std::vector<std::uint64_t> sources;       // S_i
  std::vector<std::uint64_t> destinations;  // D_i
  std::vector<std::uint64_t> edges;         // E_i
  std::uint64_t row_bytes = 0;      // T: bytes per exchanged aggregate row
  std::uint64_t feature_bytes = 0;  // F: bytes per gathered input row
  std::uint64_t edge_bytes = 0;     // E: bytes per edge
  std::uint32_t machines = 1;       // M
};

/// Counts from a centralized graph; byte sizes are left to the caller.
CostModelInput cost_input_from_graph(const ComputationGraph& graph);

struct CostEstimate {
  std::uint64_t comm_bytes = 0;  // T · Σ D_i
  std::uint64_t copy_bytes = 0;  // (F · S_1 + E · Σ E_i) / M, integer division
  double compute_ms = 0.0;       // centralized compute / M
  double comm_ms = 0.0;
  double copy_ms = 0.0;

  double total_ms() const { return comm_ms + copy_ms + compute_ms; }
};

CostEstimate estimate_cgp_latency(const CostModelInput& in, double bandwidth_bytes_per_s,
                                  double centralized_compute_ms);

}  // namespace gnnserve
