#include "gnnserve/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gnnserve/forward.hpp"
#include "gnnserve/layer.hpp"

namespace gnnserve {

EstimatorInstance random_estimator_instance(std::size_t num_candidates, std::size_t dim, std::size_t k,
                                            std::uint64_t seed) {
  require(k >= 2, "estimator: k must be >= 2");
  require(dim >= 1, "estimator: dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nq_dist(1, 3);
  std::uniform_int_distribution<int> nt_dist(0, 4);
  std::normal_distribution<double> normal(0.0, 1.0);

  EstimatorInstance inst;
  inst.dim = dim;
  inst.layers = k - 1;
  const auto width = inst.layers * dim;
  for (std::size_t u = 0; u < num_candidates; ++u) {
    const int nq = nq_dist(rng);
    const int nt = nt_dist(rng);
    const double deg = nq + nt;
    std::vector<double> q(width, 0.0), t(width, 0.0);
    for (int v = 0; v < nq; ++v)
      for (auto& x : q) x += normal(rng) / deg;
    for (int v = 0; v < nt; ++v)
      for (auto& x : t) x += normal(rng) / deg;
    inst.q.push_back(std::move(q));
    inst.t.push_back(std::move(t));
  }
  return inst;
}

EstimatorInstance estimator_instance_from_request(const GraphDataset& dataset, const ServingRequest& request,
                                                  const ModelSpec& model, const Weights& weights) {
  const auto k = model.num_layers();
  require(k >= 2, "estimator: model needs at least 2 layers");
  const auto dim = model.layer(1).message_dim();
  for (std::size_t l = 1; l < k; ++l)
    require(model.layer(l).message_dim() == dim, "estimator: message widths differ across layers");

  const auto n = dataset.num_nodes();
  const auto hidden = forward_serving_graph(model, weights, dataset, request, k - 1);
  auto input_row = [&](std::size_t l, NodeId v) -> std::span<const float> {
    if (l == 1) return v < n ? dataset.features.row(v) : request.query_features.row(v - n);
    return hidden[l - 2].row(v);
  };
  // Serving-graph in-degrees, used by GCN messages.
  std::vector<std::uint32_t> degree(n + request.num_queries(), 0);
  for (NodeId v = 0; v < n; ++v) degree[v] = static_cast<std::uint32_t>(dataset.in_csr.in_degree(v));
  for (const auto& e : request.edges) ++degree[e.dst];

  const auto cands = find_candidates(request, dataset);
  std::vector<std::vector<NodeId>> query_in(cands.size());
  for (const auto& e : request.edges) {
    if (!request.is_query(e.src) || request.is_query(e.dst)) continue;
    auto it = std::lower_bound(cands.ids.begin(), cands.ids.end(), e.dst);
    query_in[static_cast<std::size_t>(it - cands.ids.begin())].push_back(e.src);
  }

  EstimatorInstance inst;
  inst.dim = dim;
  inst.layers = k - 1;
  std::vector<double> msg(dim);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const NodeId u = cands.ids[c];
    const double deg = cands.total_degree[c];
    std::vector<double> q(inst.layers * dim, 0.0), t(inst.layers * dim, 0.0);
    for (std::size_t l = 1; l < k; ++l) {
      auto add = [&](NodeId v, std::vector<double>& acc) {
        compute_message(model.layer(l), weights.layer(l), input_row(l, v), degree[v], msg);
        for (std::size_t i = 0; i < dim; ++i) acc[(l - 1) * dim + i] += msg[i] / deg;
      };
      for (NodeId v : query_in[c]) add(v, q);
      for (NodeId v : dataset.in_csr.in_neighbors(u)) add(v, t);
    }
    inst.q.push_back(std::move(q));
    inst.t.push_back(std::move(t));
  }
  return inst;
}

namespace {

std::vector<double> layer_sum(const std::vector<double>& v, std::size_t layers, std::size_t dim) {
  std::vector<double> s(dim, 0.0);
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t i = 0; i < dim; ++i) s[i] += v[l * dim + i];
  return s;
}

}  // namespace

std::vector<double> query_norms(const EstimatorInstance& inst) {
  std::vector<double> norms;
  for (const auto& q : inst.q) {
    double sq = 0.0;
    for (double x : layer_sum(q, inst.layers, inst.dim)) sq += x * x;
    norms.push_back(std::sqrt(sq));
  }
  return norms;
}

std::vector<double> estimator_target(const EstimatorInstance& inst) {
  std::vector<double> f(inst.dim, 0.0);
  for (std::size_t u = 0; u < inst.num_candidates(); ++u) {
    auto q = layer_sum(inst.q[u], inst.layers, inst.dim);
    auto t = layer_sum(inst.t[u], inst.layers, inst.dim);
    for (std::size_t i = 0; i < inst.dim; ++i) f[i] += q[i] + t[i];
  }
  return f;
}

double analytic_variance(const EstimatorInstance& inst, std::span<const double> probabilities) {
  require(probabilities.size() == inst.num_candidates(), "estimator: probability count != candidate count");
  const auto norms = query_norms(inst);
  double s = 0.0;
  for (std::size_t u = 0; u < norms.size(); ++u) {
    require(probabilities[u] > 0.0 && probabilities[u] <= 1.0, "estimator: probabilities must lie in (0, 1]");
    s += norms[u] * norms[u] * (1.0 / probabilities[u] - 1.0);
  }
  return s;
}

EstimatorSuiteResult estimator_variance_suite(const EstimatorInstance& inst, std::span<const double> probabilities,
                                              std::size_t num_samples, std::uint64_t seed) {
  require(num_samples >= 2, "estimator: need at least 2 samples");
  EstimatorSuiteResult res;
  res.analytic_variance = analytic_variance(inst, probabilities);

  const auto dim = inst.dim;
  const auto R = inst.num_candidates();
  std::vector<std::vector<double>> qsum(R), tsum(R);
  for (std::size_t u = 0; u < R; ++u) {
    qsum[u] = layer_sum(inst.q[u], inst.layers, dim);
    tsum[u] = layer_sum(inst.t[u], inst.layers, dim);
  }
  const auto f = estimator_target(inst);

  // Welford accumulation of f̂ per dimension.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0), sample(dim);
  for (std::size_t s = 0; s < num_samples; ++s) {
    std::fill(sample.begin(), sample.end(), 0.0);
    for (std::size_t u = 0; u < R; ++u) {
      const bool z = unit(rng) < probabilities[u];
      for (std::size_t i = 0; i < dim; ++i) sample[i] += (z ? qsum[u][i] / probabilities[u] : 0.0) + tsum[u][i];
    }
    const double count = static_cast<double>(s + 1);
    for (std::size_t i = 0; i < dim; ++i) {
      const double delta = sample[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (sample[i] - mean[i]);
    }
  }
  res.mean_error.resize(dim);
  double sq = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    res.mean_error[i] = mean[i] - f[i];
    sq += res.mean_error[i] * res.mean_error[i];
    res.empirical_variance += m2[i] / static_cast<double>(num_samples - 1);
  }
  res.mean_error_norm = std::sqrt(sq);
  return res;
}

double grid_min_variance(const EstimatorInstance& inst, double gamma, double step) {
  const auto R = inst.num_candidates();
  const auto levels = static_cast<int>(std::lround(1.0 / step));
  const auto target = static_cast<int>(std::lround(gamma / step));
  require(std::abs(target * step - gamma) < 1e-9, "grid: gamma must be a multiple of the step");
  const auto norms = query_norms(inst);
  std::vector<double> sq(R);
  for (std::size_t u = 0; u < R; ++u) sq[u] = norms[u] * norms[u];

  double best = std::numeric_limits<double>::infinity();
  // Depth-first over integer levels; the last entry is forced by the sum.
  std::vector<int> units(R, 0);
  auto recurse = [&](auto&& self, std::size_t u, int remaining, double partial) -> void {
    if (u + 1 == R) {
      if (remaining < 1 || remaining > levels) return;
      const double p = remaining * step;
      best = std::min(best, partial + sq[u] * (1.0 / p - 1.0));
      return;
    }
    const int rest = static_cast<int>(R - u - 1);
    for (int a = 1; a <= levels; ++a) {
      const int left = remaining - a;
      if (left < rest) break;
      if (left > rest * levels) continue;
      const double p = a * step;
      self(self, u + 1, left, partial + sq[u] * (1.0 / p - 1.0));
    }
  };
  if (R > 0) recurse(recurse, 0, target, 0.0);
  return best;
}

}  // namespace gnnserve
