#include "gnnserve/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "gnnserve/forward.hpp"
#include "gnnserve/hash.hpp"
#include "gnnserve/inputs.hpp"

namespace gnnserve {

double PolicyBenchResult::mean(std::size_t policy, std::size_t budget) const {
  if (residual.empty()) return 0.0;
  double s = 0.0;
  for (const auto& b : residual) s += b.at(policy).at(budget);
  return s / static_cast<double>(residual.size());
}

std::vector<double> residual_errors(const GraphDataset& dataset, const ServingRequest& request,
                                    const ModelSpec& model, const Weights& weights, const PeStore& pe,
                                    std::span<const DenseMatrix> full, std::span<const NodeId> candidates,
                                    std::span<const NodeId> targets) {
  auto err = approximation_error(full, pe, candidates);
  if (targets.empty()) return err;
  const auto graph = build_srpe(request, dataset, &pe, model.num_layers(), targets);
  CentralInputs inputs(dataset, request, &pe);
  const auto outs = forward_layers(model, weights, graph, inputs);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const NodeId u = candidates[i];
    if (!std::binary_search(targets.begin(), targets.end(), u)) continue;
    double e = 0.0;
    for (std::size_t l = 1; l < model.num_layers(); ++l) {
      const auto row = graph.block(l).dst_index(u);
      if (!row) throw InvalidArgument("residual: target missing from layer " + std::to_string(l));
      const auto f = full[l - 1].row(u);
      const auto r = outs[l - 1].row(*row);
      double ss = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double d = static_cast<double>(f[j]) - r[j];
        ss += d * d;
      }
      e += std::sqrt(ss);
    }
    err[i] = e;
  }
  return err;
}

PolicyBenchResult policy_benchmark(const GraphDataset& dataset, const HoldoutPool& pool, const ModelSpec& model,
                                   const Weights& weights, const PeStore& pe, std::span<const Policy> policies,
                                   std::span<const double> budgets, std::size_t num_batches,
                                   std::size_t batch_size, std::uint64_t seed) {
  require(model.num_layers() >= 2, "policy benchmark: model needs at least two layers");
  require(pe.num_layers() >= model.num_layers() - 1, "policy benchmark: missing precomputed embeddings");
  PolicyBenchResult res;
  res.policies.assign(policies.begin(), policies.end());
  res.budgets.assign(budgets.begin(), budgets.end());
  for (std::size_t b = 0; b < num_batches; ++b) {
    const auto batch_seed = mix64(seed, b);
    const auto request = make_request(pool, dataset, batch_size, batch_seed);
    const auto cands = find_candidates(request, dataset);
    const auto full = forward_serving_graph(model, weights, dataset, request, model.num_layers() - 1);
    const auto ae = approximation_error(full, pe, cands.ids);
    auto& table = res.residual.emplace_back(policies.size(), std::vector<double>(budgets.size(), 0.0));
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      std::vector<double> scores;
      switch (policies[pi]) {
        case Policy::kQueryEdgeRatio: scores = score_query_edge_ratio(cands); break;
        case Policy::kImportance: scores = score_importance(cands, dataset); break;
        case Policy::kRandom: scores = score_random(cands.ids, batch_seed); break;
        case Policy::kOracle: scores = ae; break;
      }
      for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        const auto plan = select_targets(cands.ids, scores, budgets[bi], policies[pi], batch_seed);
        const auto err = residual_errors(dataset, request, model, weights, pe, full, cands.ids, plan.targets);
        for (double e : err) table[pi][bi] += e;
      }
    }
  }
  return res;
}

void write_policy_table(std::ostream& os, const PolicyBenchResult& result) {
  os << "policy,budget,mean_residual\n";
  char buf[128];
  for (std::size_t p = 0; p < result.policies.size(); ++p) {
    for (std::size_t b = 0; b < result.budgets.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%s,%g,%.9g\n", to_string(result.policies[p]).c_str(), result.budgets[b],
                    result.mean(p, b));
      os << buf;
    }
  }
}

std::vector<LatencyRow> latency_benchmark(const ServingEngine& engine, std::span<const ServingRequest> requests) {
  std::vector<LatencyRow> rows;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto res = engine.serve(requests[i]);
    rows.push_back({engine.config().strategy, i, requests[i].num_queries(), res.latency});
  }
  return rows;
}

std::vector<double> poisson_interarrivals(double rate, std::size_t count, std::uint64_t seed) {
  require(rate > 0.0, "arrival rate must be positive");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> unit(1.0);
  std::vector<double> gaps(count);
  for (auto& g : gaps) g = unit(rng) / rate;
  return gaps;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

ThroughputResult simulate_fifo(std::span<const double> service_ms, double rate, double duration_s,
                               std::uint64_t seed) {
  require(rate > 0.0, "arrival rate must be positive");
  require(duration_s > 0.0, "duration must be positive");
  require(!service_ms.empty(), "no service times");
  ThroughputResult r;
  r.rate = rate;
  r.duration_s = duration_s;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> unit(1.0);
  std::vector<double> latencies;
  double arrival = 0.0, free_at = 0.0;
  for (std::size_t i = 0;; ++i) {
    arrival += unit(rng) / rate;
    if (arrival > duration_s) break;
    ++r.arrived;
    const double start = std::max(arrival, free_at);
    free_at = start + service_ms[i % service_ms.size()] / 1e3;
    if (free_at <= duration_s) {
      ++r.completed;
      latencies.push_back((free_at - arrival) * 1e3);
    }
  }
  r.throughput = static_cast<double>(r.completed) / duration_s;
  r.p50_ms = percentile(latencies, 50);
  r.p95_ms = percentile(latencies, 95);
  r.p99_ms = percentile(latencies, 99);
  return r;
}

ThroughputResult throughput_benchmark(const ServingEngine& engine, std::span<const ServingRequest> requests,
                                      double rate, double duration_s, std::uint64_t seed) {
  std::vector<double> service;
  for (const auto& req : requests) service.push_back(engine.serve(req).latency.total_ms());
  return simulate_fifo(service, rate, duration_s, seed);
}

void write_throughput_header(std::ostream& os) {
  os << "rate,duration_s,arrived,completed,throughput,p50_ms,p95_ms,p99_ms\n";
}

void write_throughput_line(std::ostream& os, const ThroughputResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%g,%g,%zu,%zu,%.6g,%.3f,%.3f,%.3f\n", r.rate, r.duration_s, r.arrived,
                r.completed, r.throughput, r.p50_ms, r.p95_ms, r.p99_ms);
  os << buf;
}

}  // namespace gnnserve
