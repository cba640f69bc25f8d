#include "gnnserve/verify.hpp"

#include <cmath>
#include <cstdio>

#include "gnnserve/cgp.hpp"
#include "gnnserve/comp_graph.hpp"
#include "gnnserve/estimator.hpp"
#include "gnnserve/forward.hpp"
#include "gnnserve/hash.hpp"
#include "gnnserve/inputs.hpp"
#include "gnnserve/policy.hpp"
#include "gnnserve/workload.hpp"

namespace gnnserve {

namespace {

constexpr std::size_t kNodes = 200;
constexpr double kAvgDegree = 10.0;
constexpr std::size_t kFeatures = 8;
constexpr std::uint32_t kHidden = 8;
constexpr std::size_t kBatch = 8;

struct Instance {
  HoldoutSplit split;
  ServingRequest request;
};

Instance make_instance(std::uint64_t seed) {
  Instance inst{split_holdout(gen_random_graph(kNodes, kAvgDegree, kFeatures, seed), 0.5, seed), {}};
  inst.request = make_request(inst.split.pool, inst.split.serving, kBatch, seed);
  return inst;
}

void record(VerifyReport& rep, const std::string& name, double err, double tol) {
  ++rep.cases;
  const bool ok = std::isfinite(err) && err <= tol;
  if (!ok) ++rep.failures;
  if (std::isfinite(err)) rep.max_error = std::max(rep.max_error, err);
  char buf[64];
  std::snprintf(buf, sizeof(buf), ",%.3e,%s", err, ok ? "pass" : "FAIL");
  rep.lines.push_back(name + buf);
}

}  // namespace

std::vector<MergeCase> merge_cases() {
  return {
      {"sum", LayerKind::kGcn},
      {"mean", LayerKind::kSageMean},
      {"max", LayerKind::kSageMax},
      {"power-mean-0.5", LayerKind::kPowerMean, 0.5},
      {"power-mean-2", LayerKind::kPowerMean, 2.0},
      {"power-mean-3", LayerKind::kPowerMean, 3.0},
      {"moments-2", LayerKind::kMoments, 1.0, 2},
      {"moments-3", LayerKind::kMoments, 1.0, 3},
      {"softmax", LayerKind::kGat},
  };
}

double cgp_equivalence_error(const GraphDataset& dataset, const ServingRequest& request, const ModelSpec& model,
                             const Weights& weights, std::uint32_t num_partitions, double gamma, std::uint64_t seed,
                             TransportKind transport, WirePrecision precision) {
  const auto k = model.num_layers();
  const auto pe = precompute_embeddings(dataset, model, weights);
  const auto cands = find_candidates(request, dataset);
  const auto plan = select_targets(cands.ids, score_random(cands.ids, seed), gamma, Policy::kRandom, seed);

  const auto central = build_srpe(request, dataset, &pe, k, plan.targets);
  CentralInputs central_inputs(dataset, request, &pe);
  const auto expected = forward_full(model, central, weights, central_inputs);

  auto partitioned = partition_random_hash(dataset, num_partitions, seed);
  distribute_pe(partitioned, pe);
  const auto shards = partition_request(request, partitioned.map);
  DenseMatrix got;
  WorldOptions opts;
  opts.transport = transport;
  run_world(num_partitions, [&](World& world) {
    const auto r = world.rank();
    const auto& part = partitioned.parts[r];
    const auto shard = build_partitioned(shards[r], part, partitioned.map, plan.targets, k);
    LocalInputs inputs(part, shards[r]);
    auto out = execute_model(world, shard, model, weights, inputs, {precision});
    if (r == 0) got = std::move(out);
  }, opts);
  return max_abs_diff(expected, got);
}

std::vector<std::string> verify_suite_names() { return {"cgp-equivalence", "srpe-exactness", "sampling", "estimator"}; }

VerifyReport run_verify_suite(const std::string& suite, const VerifyOptions& options) {
  VerifyReport rep;
  rep.suite = suite;
  require(options.num_partitions >= 1, "verify: --p must be >= 1");
  if (suite == "cgp-equivalence") {
    for (std::size_t g = 0; g < options.num_graphs; ++g) {
      const auto seed = mix64(options.seed, g);
      const auto inst = make_instance(seed);
      for (const auto& mc : merge_cases()) {
        for (std::size_t k : {2, 3}) {
          const auto model = make_model(mc.kind, k, kFeatures, kHidden, mc.power, mc.moment);
          const auto weights = init_weights(model, seed);
          const double err = cgp_equivalence_error(inst.split.serving, inst.request, model, weights,
                                                   options.num_partitions, 0.5, seed, options.transport);
          record(rep, "graph" + std::to_string(g) + "/" + mc.name + "/k" + std::to_string(k), err, options.tolerance);
        }
      }
    }
  } else if (suite == "srpe-exactness") {
    for (std::size_t g = 0; g < options.num_graphs; ++g) {
      const auto seed = mix64(options.seed, g);
      const auto inst = make_instance(seed);
      const auto& ds = inst.split.serving;
      for (const auto& mc : merge_cases()) {
        const auto model = make_model(mc.kind, 2, kFeatures, kHidden, mc.power, mc.moment);
        const auto weights = init_weights(model, seed);
        const auto pe = precompute_embeddings(ds, model, weights);
        CentralInputs inputs(ds, inst.request, &pe);
        const auto full = forward_full(model, build_full_k_hop(inst.request, ds, 2), weights, inputs);
        const auto targets = find_candidates(inst.request, ds).ids;
        const auto srpe = forward_full(model, build_srpe(inst.request, ds, &pe, 2, targets), weights, inputs);
        record(rep, "graph" + std::to_string(g) + "/" + mc.name, max_abs_diff(full, srpe), options.tolerance);
      }
    }
  } else if (suite == "sampling") {
    for (std::size_t g = 0; g < options.num_graphs; ++g) {
      const auto seed = mix64(options.seed, g);
      const auto inst = make_instance(seed);
      const auto& ds = inst.split.serving;
      const std::vector<std::uint32_t> saturating(3, static_cast<std::uint32_t>(ds.num_nodes() + kBatch));
      for (const auto& mc : merge_cases()) {
        const auto model = make_model(mc.kind, 3, kFeatures, kHidden, mc.power, mc.moment);
        const auto weights = init_weights(model, seed);
        CentralInputs inputs(ds, inst.request);
        const auto full = forward_full(model, build_full_k_hop(inst.request, ds, 3), weights, inputs);
        const auto sampled = forward_full(model, build_sampled(inst.request, ds, saturating, seed), weights, inputs);
        record(rep, "graph" + std::to_string(g) + "/" + mc.name, max_abs_diff(full, sampled), options.tolerance);
      }
    }
  } else if (suite == "estimator") {
    for (std::size_t g = 0; g < options.num_graphs; ++g) {
      const auto seed = mix64(options.seed, g);
      const auto inst = random_estimator_instance(2 + g % 4, 3, 2 + g % 2, seed);
      const double gamma = 0.5;
      const auto p = optimal_probabilities(query_norms(inst), gamma * static_cast<double>(inst.num_candidates()));
      const double s_opt = analytic_variance(inst, p);
      const double s_grid = grid_min_variance(inst, gamma * static_cast<double>(inst.num_candidates()));
      record(rep, "instance" + std::to_string(g), std::max(0.0, s_opt - s_grid), 1e-9);
    }
  } else {
    throw InvalidArgument("unknown verify suite '" + suite + "'");
  }
  return rep;
}

}  // namespace gnnserve
