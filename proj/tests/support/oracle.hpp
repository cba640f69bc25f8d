#pragma once

// Reference implementations used as test oracles. They work on plain
// adjacency lists, one destination at a time, and share no code with the
// library's layer, block or CGP paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/request.hpp"
#include "gnnserve/workload.hpp"

namespace oracle {

using gnnserve::DenseMatrix;
using gnnserve::LayerKind;
using gnnserve::LayerSpec;
using gnnserve::LayerWeights;
using gnnserve::NodeId;

using Rows = std::vector<std::vector<double>>;
using Adjacency = std::vector<std::vector<NodeId>>;  // in-neighbors per node

inline Rows to_rows(const DenseMatrix& m) {
  Rows r(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) r[i].assign(m.row(i).begin(), m.row(i).end());
  return r;
}

inline std::vector<double> vec_mat(const std::vector<double>& x, const DenseMatrix& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[i] * w.at(i, j);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> round_f32(std::vector<double> v) {
  for (auto& x : v) x = static_cast<float>(x);
  return v;
}

/// h^(l) of node v from h^(l-1) of every node, written straight from the
/// layer definitions.
inline std::vector<double> layer_at(const LayerSpec& spec, const LayerWeights& w, const Adjacency& in_nbrs,
                                    const Rows& h, NodeId v) {
  const auto& nbrs = in_nbrs[v];
  const double n = static_cast<double>(nbrs.size());
  const std::size_t md = spec.kind == LayerKind::kGat ? spec.out_dim : spec.in_dim;
  std::vector<double> agg(md, 0.0);
  auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  if (!nbrs.empty()) {
    switch (spec.kind) {
      case LayerKind::kGcn:
        for (auto u : nbrs) {
          const double c = 1.0 / std::sqrt((static_cast<double>(in_nbrs[u].size()) + 1.0) * (n + 1.0));
          for (std::size_t j = 0; j < md; ++j) agg[j] += h[u][j] * c;
        }
        break;
      case LayerKind::kSageMean:
        for (auto u : nbrs)
          for (std::size_t j = 0; j < md; ++j) agg[j] += h[u][j] / n;
        break;
      case LayerKind::kSageMax:
        for (std::size_t j = 0; j < md; ++j) {
          double m = -std::numeric_limits<double>::infinity();
          for (auto u : nbrs) m = std::max(m, h[u][j]);
          agg[j] = m;
        }
        break;
      case LayerKind::kPowerMean:
        for (std::size_t j = 0; j < md; ++j) {
          double s = 0.0;
          for (auto u : nbrs) s += std::pow(softplus(h[u][j]), spec.power);
          agg[j] = std::pow(s / n, 1.0 / spec.power);
        }
        break;
      case LayerKind::kMoments:
        for (std::size_t j = 0; j < md; ++j) {
          double mean = 0.0;
          for (auto u : nbrs) mean += h[u][j];
          mean /= n;
          double s = 0.0;
          for (auto u : nbrs) s += std::pow(h[u][j] - mean, spec.moment);
          s /= n;
          const double root = std::pow(std::abs(s), 1.0 / spec.moment);
          agg[j] = (spec.moment % 2 == 1 && s < 0) ? -root : root;
        }
        break;
      case LayerKind::kGat: {
        const auto zv = vec_mat(h[v], w.weight);
        std::vector<double> logits;
        std::vector<std::vector<double>> zs;
        for (auto u : nbrs) {
          zs.push_back(vec_mat(h[u], w.weight));
          const double e = dot(zs.back(), w.att_src) + dot(zv, w.att_dst);
          logits.push_back(e > 0 ? e : 0.2 * e);
        }
        const double top = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - top);
        for (std::size_t e = 0; e < nbrs.size(); ++e) {
          const double a = std::exp(logits[e] - top) / denom;
          for (std::size_t j = 0; j < md; ++j) agg[j] += a * zs[e][j];
        }
        break;
      }
    }
  }
  std::vector<double> out(w.bias.begin(), w.bias.end());
  if (spec.kind == LayerKind::kGat) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += agg[j];
  } else {
    const auto a = vec_mat(agg, w.weight);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += a[j];
    if (spec.kind != LayerKind::kGcn) {
      const auto s = vec_mat(h[v], w.self_weight);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += s[j];
    }
  }
  if (spec.activation)
    for (auto& x : out) x = std::max(x, 0.0);
  return round_f32(out);
}

/// Serving-graph adjacency: training in-edges plus request edges, sorted.
inline Adjacency serving_adjacency(const gnnserve::GraphDataset& ds, const gnnserve::ServingRequest& req) {
  Adjacency adj(ds.num_nodes() + req.num_queries());
  for (NodeId v = 0; v < ds.num_nodes(); ++v) {
    const auto nb = ds.in_csr.in_neighbors(v);
    adj[v].assign(nb.begin(), nb.end());
  }
  for (const auto& e : req.edges) adj[e.dst].push_back(e.src);
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

inline Adjacency training_adjacency(const gnnserve::GraphDataset& ds) {
  Adjacency adj(ds.num_nodes());
  for (NodeId v = 0; v < ds.num_nodes(); ++v) {
    const auto nb = ds.in_csr.in_neighbors(v);
    adj[v].assign(nb.begin(), nb.end());
  }
  return adj;
}

inline Rows serving_features(const gnnserve::GraphDataset& ds, const gnnserve::ServingRequest& req) {
  auto rows = to_rows(ds.features);
  for (std::size_t i = 0; i < req.num_queries(); ++i)
    rows.emplace_back(req.query_features.row(i).begin(), req.query_features.row(i).end());
  return rows;
}

/// Every layer over every node. result[l] holds h^(l); result[0] = input.
inline std::vector<Rows> forward_all(const gnnserve::ModelSpec& model, const gnnserve::Weights& weights,
                                     const Adjacency& adj, Rows h0) {
  std::vector<Rows> hs{std::move(h0)};
  for (std::size_t l = 1; l <= model.num_layers(); ++l) {
    Rows next(adj.size());
    for (NodeId v = 0; v < adj.size(); ++v) next[v] = layer_at(model.layer(l), weights.layer(l), adj, hs.back(), v);
    hs.push_back(std::move(next));
  }
  return hs;
}

/// PE semantics: layers run over the serving graph, but after every layer
/// l < k the training nodes outside `recomputed` are reset to their
/// training-graph embedding. Returns the B query rows of h^(k).
inline Rows srpe_queries(const gnnserve::ModelSpec& model, const gnnserve::Weights& weights,
                         const gnnserve::GraphDataset& ds, const gnnserve::ServingRequest& req,
                         const std::set<NodeId>& recomputed) {
  const auto train = forward_all(model, weights, training_adjacency(ds), to_rows(ds.features));
  const auto adj = serving_adjacency(ds, req);
  Rows h = serving_features(ds, req);
  for (std::size_t l = 1; l <= model.num_layers(); ++l) {
    Rows next(adj.size());
    for (NodeId v = 0; v < adj.size(); ++v) next[v] = layer_at(model.layer(l), weights.layer(l), adj, h, v);
    if (l < model.num_layers()) {
      for (NodeId v = 0; v < ds.num_nodes(); ++v)
        if (!recomputed.contains(v)) next[v] = train[l][v];
    }
    h = std::move(next);
  }
  return Rows(h.begin() + static_cast<std::ptrdiff_t>(ds.num_nodes()), h.end());
}

/// Query rows of the exact serving-graph forward pass.
inline Rows full_queries(const gnnserve::ModelSpec& model, const gnnserve::Weights& weights,
                         const gnnserve::GraphDataset& ds, const gnnserve::ServingRequest& req) {
  const auto hs = forward_all(model, weights, serving_adjacency(ds, req), serving_features(ds, req));
  return Rows(hs.back().begin() + static_cast<std::ptrdiff_t>(ds.num_nodes()), hs.back().end());
}

inline double max_abs_diff(const Rows& a, const DenseMatrix& b) {
  if (a.size() != b.rows()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b.cols()) return std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b.at(i, j)));
  }
  return m;
}

}  // namespace oracle
