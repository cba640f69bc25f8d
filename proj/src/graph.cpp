#include "gnnserve/graph.hpp"

#include <algorithm>
#include <string>

namespace gnnserve {

Csr build_csr(std::span<const Edge> edges, std::size_t num_nodes) {
  Csr csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (const auto& e : edges) {
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw InvalidArgument("build_csr: edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    ++csr.offsets[e.dst + 1];
  }
  for (std::size_t v = 0; v < num_nodes; ++v) csr.offsets[v + 1] += csr.offsets[v];
  csr.neighbors.resize(edges.size());
  std::vector<std::uint64_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& e : edges) csr.neighbors[cursor[e.dst]++] = e.src;
  for (std::size_t v = 0; v < num_nodes; ++v) {
    std::sort(csr.neighbors.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v]),
              csr.neighbors.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v + 1]));
  }
  return csr;
}

std::vector<Edge> export_edges(const Csr& csr) {
  std::vector<Edge> edges;
  edges.reserve(csr.num_edges());
  for (NodeId v = 0; v < csr.num_nodes(); ++v) {
    for (NodeId u : csr.in_neighbors(v)) edges.push_back({u, v});
  }
  return edges;
}

void validate_csr(const Csr& csr) {
  if (csr.offsets.empty() || csr.offsets.front() != 0) throw FormatError("csr: offsets must start at 0");
  for (std::size_t i = 1; i < csr.offsets.size(); ++i) {
    if (csr.offsets[i] < csr.offsets[i - 1]) throw FormatError("csr: offsets decrease");
  }
  if (csr.offsets.back() != csr.neighbors.size()) throw FormatError("csr: offsets do not cover neighbors");
  const auto n = csr.num_nodes();
  for (NodeId u : csr.neighbors) {
    if (u >= n) throw FormatError("csr: neighbor id out of range");
  }
}

std::vector<std::uint64_t> GraphDataset::out_degrees() const {
  std::vector<std::uint64_t> deg(num_nodes(), 0);
  for (NodeId u : in_csr.neighbors) ++deg[u];
  return deg;
}

std::vector<NodeId> GraphDataset::test_nodes() const {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < test_mask.size(); ++v) {
    if (test_mask[v]) out.push_back(v);
  }
  return out;
}

GraphDataset make_dataset(Csr csr, DenseMatrix features, std::vector<std::uint8_t> train_mask,
                          std::vector<std::uint8_t> test_mask) {
  validate_csr(csr);
  const auto n = csr.num_nodes();
  require(features.rows() == n, "dataset: feature rows != num_nodes");
  require(train_mask.size() == n && test_mask.size() == n, "dataset: mask length != num_nodes");
  return GraphDataset{std::move(csr), std::move(features), std::move(train_mask), std::move(test_mask)};
}

}  // namespace gnnserve
