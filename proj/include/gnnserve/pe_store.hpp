#pragma once

#include <span>
#include <vector>

#include "gnnserve/dense.hpp"

namespace gnnserve {

/// Precomputed layer embeddings p^(l) for l in [1, k-1]. Rows are indexed by
/// the owning container's node order (global ids for a whole-graph store,
/// owned-node order for a partition's store).
struct PeStore {
  std::vector<DenseMatrix> layers;  // layers[l - 1] holds p^(l)

  std::size_t num_layers() const { return layers.size(); }
  bool has_layer(std::size_t l) const { return l >= 1 && l <= layers.size(); }
  std::span<const float> row(std::size_t l, std::size_t r) const { return layers.at(l - 1).row(r); }
  std::size_t hidden_dim(std::size_t l) const { return layers.at(l - 1).cols(); }
};

}  // namespace gnnserve
