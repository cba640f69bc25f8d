#pragma once

#include <vector>

#include "gnnserve/comp_graph.hpp"
#include "gnnserve/inputs.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/pe_store.hpp"

namespace gnnserve {

/// Per-layer destination outputs of a computation graph; outputs[l - 1]
/// rows follow block l's dst_ids.
std::vector<DenseMatrix> forward_layers(const ModelSpec& model, const Weights& weights,
                                        const ComputationGraph& graph, const InputProvider& inputs,
                                        ExecTiming* timing = nullptr);

/// Final embeddings of the query nodes, rows in query-id order.
DenseMatrix forward_full(const ModelSpec& model, const ComputationGraph& graph, const Weights& weights,
                         const InputProvider& inputs, ExecTiming* timing = nullptr);

/// Message passing over every node of `csr` for layers 1..upto (default k).
/// Returns h^(1)..h^(upto), each num_nodes rows.
std::vector<DenseMatrix> forward_all_nodes(const ModelSpec& model, const Weights& weights, const Csr& csr,
                                           const DenseMatrix& features, std::size_t upto = 0);

/// p^(l) = h^(l) over the training graph for l in [1, k-1].
PeStore precompute_embeddings(const GraphDataset& dataset, const ModelSpec& model, const Weights& weights);

/// h^(1)..h^(upto) over the training graph joined with a request's nodes
/// and edges (num_nodes + B rows, queries last).
std::vector<DenseMatrix> forward_serving_graph(const ModelSpec& model, const Weights& weights,
                                               const GraphDataset& dataset, const ServingRequest& request,
                                               std::size_t upto = 0);

}  // namespace gnnserve
