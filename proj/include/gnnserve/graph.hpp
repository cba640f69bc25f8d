#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gnnserve/dense.hpp"
#include "gnnserve/types.hpp"

namespace gnnserve {

struct Edge {
  NodeId src;
  NodeId dst;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

/// In-edge CSR: neighbors of v are the sources of edges into v, ascending.
struct Csr {
  std::vector<std::uint64_t> offsets{0};
  std::vector<NodeId> neighbors;

  std::size_t num_nodes() const { return offsets.size() - 1; }
  std::size_t num_edges() const { return neighbors.size(); }
  std::span<const NodeId> in_neighbors(NodeId v) const {
    return {neighbors.data() + offsets[v], neighbors.data() + offsets[v + 1]};
  }
  std::size_t in_degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }

  bool operator==(const Csr&) const = default;
};

/// Group edges by destination. Duplicate edges are kept.
Csr build_csr(std::span<const Edge> edges, std::size_t num_nodes);

/// Edge list in (dst, src) order, the inverse of build_csr.
std::vector<Edge> export_edges(const Csr& csr);

/// Checks offsets/neighbor invariants; throws FormatError on violation.
void validate_csr(const Csr& csr);

/// Immutable training graph: in-CSR, node features, and split masks.
struct GraphDataset {
  Csr in_csr;
  DenseMatrix features;  // num_nodes x F
  std::vector<std::uint8_t> train_mask;
  std::vector<std::uint8_t> test_mask;

  std::size_t num_nodes() const { return in_csr.num_nodes(); }
  std::size_t num_edges() const { return in_csr.num_edges(); }
  std::size_t feature_dim() const { return features.cols(); }

  std::vector<std::uint64_t> out_degrees() const;
  std::vector<NodeId> test_nodes() const;
};

GraphDataset make_dataset(Csr csr, DenseMatrix features, std::vector<std::uint8_t> train_mask,
                          std::vector<std::uint8_t> test_mask);

}  // namespace gnnserve
