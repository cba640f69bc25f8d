#include "gnnserve/forward.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "gnnserve/layer.hpp"

namespace gnnserve {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

std::vector<DenseMatrix> forward_layers(const ModelSpec& model, const Weights& weights,
                                        const ComputationGraph& graph, const InputProvider& inputs,
                                        ExecTiming* timing) {
  model.validate();
  check_weights(model, weights);
  require(graph.num_layers() == model.num_layers(), "forward: graph depth != model depth");
  std::vector<DenseMatrix> outputs;
  outputs.reserve(model.num_layers());
  for (std::size_t l = 1; l <= model.num_layers(); ++l) {
    const auto& spec = model.layer(l);
    const auto& block = graph.block(l);
    const DenseMatrix* prev = l > 1 ? &outputs.back() : nullptr;
    const auto t0 = Clock::now();
    auto src = gather_inputs(block.src_ids, block.src_bindings, spec.in_dim, inputs, prev);
    auto dst = gather_inputs(block.dst_ids, block.dst_bindings, spec.in_dim, inputs, prev);
    const auto t1 = Clock::now();
    outputs.push_back(layer_forward(spec, weights.layer(l), block, src, dst));
    if (timing) {
      timing->gather_ms += elapsed_ms(t0, t1);
      timing->compute_ms += elapsed_ms(t1, Clock::now());
    }
  }
  return outputs;
}

DenseMatrix forward_full(const ModelSpec& model, const ComputationGraph& graph, const Weights& weights,
                         const InputProvider& inputs, ExecTiming* timing) {
  auto outputs = forward_layers(model, weights, graph, inputs, timing);
  return std::move(outputs.back());
}

std::vector<DenseMatrix> forward_all_nodes(const ModelSpec& model, const Weights& weights, const Csr& csr,
                                           const DenseMatrix& features, std::size_t upto) {
  model.validate();
  check_weights(model, weights);
  if (upto == 0) upto = model.num_layers();
  require(upto <= model.num_layers(), "forward_all_nodes: upto exceeds model depth");
  require(features.rows() == csr.num_nodes(), "forward_all_nodes: feature rows != num_nodes");
  require(features.cols() == model.layer(1).in_dim, "forward_all_nodes: feature width != model input dim");

  const auto n = csr.num_nodes();
  ComputationBlock block;
  block.src_ids.resize(n);
  std::iota(block.src_ids.begin(), block.src_ids.end(), NodeId{0});
  block.dst_ids = block.src_ids;
  block.in_offsets = csr.offsets;
  block.in_src.assign(csr.neighbors.begin(), csr.neighbors.end());
  block.src_degree.resize(n);
  for (NodeId v = 0; v < n; ++v) block.src_degree[v] = static_cast<std::uint32_t>(csr.in_degree(v));

  std::vector<DenseMatrix> out;
  const DenseMatrix* h = &features;
  for (std::size_t l = 1; l <= upto; ++l) {
    out.push_back(layer_forward(model.layer(l), weights.layer(l), block, *h, *h));
    h = &out.back();
  }
  return out;
}

PeStore precompute_embeddings(const GraphDataset& dataset, const ModelSpec& model, const Weights& weights) {
  require(model.num_layers() >= 2, "precompute: model needs at least 2 layers");
  PeStore store;
  store.layers = forward_all_nodes(model, weights, dataset.in_csr, dataset.features, model.num_layers() - 1);
  return store;
}

std::vector<DenseMatrix> forward_serving_graph(const ModelSpec& model, const Weights& weights,
                                               const GraphDataset& dataset, const ServingRequest& request,
                                               std::size_t upto) {
  request.validate(dataset);
  const auto n = dataset.num_nodes();
  const auto total = n + request.num_queries();
  auto edges = export_edges(dataset.in_csr);
  edges.insert(edges.end(), request.edges.begin(), request.edges.end());
  const auto csr = build_csr(edges, total);

  DenseMatrix features(total, dataset.feature_dim());
  std::copy(dataset.features.data().begin(), dataset.features.data().end(), features.data().begin());
  std::copy(request.query_features.data().begin(), request.query_features.data().end(),
            features.data().begin() + static_cast<std::ptrdiff_t>(n * dataset.feature_dim()));
  return forward_all_nodes(model, weights, csr, features, upto);
}

}  // namespace gnnserve
