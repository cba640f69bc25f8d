#pragma once

#include <span>
#include <vector>

#include "gnnserve/comp_graph.hpp"
#include "gnnserve/dense.hpp"
#include "gnnserve/model.hpp"

namespace gnnserve {

/// Message M(h_u) for one source row, written to `out` (message_dim wide).
///   GCN: h_u / sqrt(deg(u) + 1)    SAGE / MOMENTS: h_u
///   POWER_MEAN: softplus(h_u)      GAT: W h_u
void compute_message(const LayerSpec& layer, const LayerWeights& w, std::span<const float> h,
                     std::uint32_t src_degree, std::span<double> out);

/// Messages for every source of a block, row-major S x message_dim.
std::vector<double> compute_messages(const LayerSpec& layer, const LayerWeights& w,
                                     const ComputationBlock& block, const DenseMatrix& src_inputs);

/// a_src · z for a GAT message z = W h_u.
double attention_src_term(const LayerWeights& w, std::span<const double> z);
/// a_dst · (W h_v) for a GAT destination's previous embedding.
double attention_dst_term(const LayerWeights& w, std::span<const float> h_dst);
/// Unnormalized GAT logit for one edge.
inline double attention_logit(double src_term, double dst_term) { return leaky_relu(src_term + dst_term); }

/// x^n for integer n.
double int_pow(double x, int n);

/// U(h_v, agg): GCN agg·W + b; GAT agg + b; the rest h_v·W_self + agg·W + b;
/// ReLU when the layer has an activation. 64-bit accumulation, one rounding.
void apply_update(const LayerSpec& layer, const LayerWeights& w, std::span<const float> self_input,
                  std::span<const double> agg, std::span<float> out);

/// One message-passing layer over a block. src_inputs rows follow
/// block.src_ids, dst_prev rows follow block.dst_ids. A destination without
/// in-edges aggregates to the zero vector.
DenseMatrix layer_forward(const LayerSpec& layer, const LayerWeights& w, const ComputationBlock& block,
                          const DenseMatrix& src_inputs, const DenseMatrix& dst_prev);

}  // namespace gnnserve
