#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "gnnserve/estimator.hpp"
#include "gnnserve/forward.hpp"
#include "gnnserve/policy.hpp"
#include "gnnserve/workload.hpp"

using namespace gnnserve;

namespace {

GraphDataset dataset_from(const std::vector<Edge>& edges, std::size_t n) {
  return make_dataset(build_csr(edges, n), DenseMatrix(n, 1), std::vector<std::uint8_t>(n, 1),
                      std::vector<std::uint8_t>(n, 0));
}

/// Exhaustive S over every probability vector on the 0.05 grid with the
/// given sum, enumerated as integer level tuples.
double brute_grid_min(const EstimatorInstance& inst, int target_levels) {
  const auto norms = query_norms(inst);
  const std::size_t R = norms.size();
  std::vector<int> a(R, 1);
  double best = INFINITY;
  while (true) {
    if (std::accumulate(a.begin(), a.end(), 0) == target_levels) {
      double s = 0.0;
      for (std::size_t u = 0; u < R; ++u) s += norms[u] * norms[u] * (1.0 / (a[u] * 0.05) - 1.0);
      best = std::min(best, s);
    }
    std::size_t i = 0;
    while (i < R && a[i] == 20) a[i++] = 1;
    if (i == R) break;
    ++a[i];
  }
  return best;
}

}  // namespace

TEST(Candidates, EmptyRequestHasNone) {
  ServingRequest r;
  r.num_nodes = 8;
  r.query_features = DenseMatrix(1, 4);
  EXPECT_TRUE(find_candidates(r, fixtures::example_graph()).empty());
}

TEST(Candidates, ExampleQueriesGiveFourCandidates) {
  const auto c = find_candidates(fixtures::example_request(), fixtures::example_graph());
  EXPECT_EQ(c.ids, (std::vector<NodeId>{2, 3, 4, 7}));
  EXPECT_EQ(c.query_edges, (std::vector<std::uint32_t>{2, 1, 1, 1}));
  EXPECT_EQ(c.total_degree, (std::vector<std::uint32_t>{4, 4, 3, 2}));
}

TEST(Candidates, MatchBruteForceScan) {
  const auto inst = fixtures::random_instance(300, 6, 2, 12, 5);
  const auto& ds = inst.dataset();
  std::map<NodeId, std::uint32_t> nq;
  for (const auto& e : inst.request.edges)
    if (!inst.request.is_query(e.dst)) ++nq[e.dst];
  const auto c = find_candidates(inst.request, ds);
  ASSERT_EQ(c.size(), nq.size());
  std::size_t i = 0;
  for (const auto& [u, count] : nq) {
    EXPECT_EQ(c.ids[i], u);
    EXPECT_EQ(c.query_edges[i], count);
    EXPECT_EQ(c.total_degree[i], ds.in_csr.in_degree(u) + count);
    ++i;
  }
}

TEST(RatioPolicy, OnlyQueryEdgesScoresOne) {
  CandidateSet c;
  c.ids = {0, 1};
  c.query_edges = {3, 1};
  c.total_degree = {3, 4};
  EXPECT_EQ(score_query_edge_ratio(c), (std::vector<double>{1.0, 0.25}));
}

TEST(RatioPolicy, ExampleHalfBudgetPicksTwoAndSeven) {
  const auto g = fixtures::example_graph();
  const auto c = find_candidates(fixtures::example_request(), g);
  const auto plan = select_targets(c.ids, score_query_edge_ratio(c), 0.5);
  EXPECT_EQ(plan.targets, (std::vector<NodeId>{2, 7}));
}

TEST(ImportancePolicy, HandExamples) {
  // node 1 <- node 0 (in-degree 1, from node 2)
  EXPECT_DOUBLE_EQ(importance_scores(dataset_from({{2, 0}, {0, 1}}, 3).in_csr)[1], 1.0);
  // node 3 <- {0, 1}; deg(0) = 1, deg(1) = 2
  const auto s = importance_scores(dataset_from({{2, 0}, {2, 1}, {0, 1}, {0, 3}, {1, 3}}, 4).in_csr);
  EXPECT_DOUBLE_EQ(s[3], 0.75);
  EXPECT_DOUBLE_EQ(s[2], 0.0);  // isolated in the in-degree sense
}

TEST(ImportancePolicy, MatchesBruteForceDoubleLoop) {
  const auto g = gen_random_graph(50, 3, 1, 7);
  const auto s = importance_scores(g.in_csr);
  for (NodeId v = 0; v < 50; ++v) {
    double want = 0.0;
    const auto nb = g.in_csr.in_neighbors(v);
    for (auto u : nb) {
      const double du = static_cast<double>(g.in_csr.in_degree(u));
      if (du > 0) want += 1.0 / du;
    }
    if (!nb.empty()) want /= static_cast<double>(nb.size());
    EXPECT_NEAR(s[v], want, 1e-12);
  }
}

TEST(RandomPolicy, StatelessAndSeedDependent) {
  const std::vector<NodeId> ids{5, 9, 12, 40};
  EXPECT_EQ(score_random(ids, 3), score_random(ids, 3));
  EXPECT_NE(score_random(ids, 3), score_random(ids, 4));
  EXPECT_EQ(random_score(9, 3), score_random(ids, 3)[1]);
  for (double x : score_random(ids, 1)) {
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(SelectTargets, BudgetEdges) {
  const std::vector<NodeId> ids{1, 2, 3, 4};
  const std::vector<double> sc{0.1, 0.4, 0.3, 0.2};
  EXPECT_TRUE(select_targets(ids, sc, 0.0).targets.empty());
  EXPECT_EQ(select_targets(ids, sc, 1.0).targets, ids);
  EXPECT_EQ(select_targets(ids, sc, 0.5).targets, (std::vector<NodeId>{2, 3}));
  EXPECT_THROW(select_targets(ids, sc, 1.5), InvalidArgument);
  EXPECT_THROW(select_targets(ids, sc, -0.1), InvalidArgument);
}

TEST(SelectTargets, TiesGoToSmallerIds) {
  const std::vector<NodeId> ids{3, 7, 9, 11};
  const std::vector<double> sc{0.5, 0.5, 0.5, 0.9};
  EXPECT_EQ(select_targets(ids, sc, 0.5).targets, (std::vector<NodeId>{3, 11}));
}

TEST(SelectTargets, BudgetIsAlwaysExact) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng() % 40;
    std::vector<NodeId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<double> sc(n);
    for (auto& x : sc) x = static_cast<double>(rng() % 5);
    const double gamma = static_cast<double>(rng() % 21) / 20.0;
    const auto plan = select_targets(ids, sc, gamma);
    EXPECT_EQ(plan.targets.size(), static_cast<std::size_t>(std::floor(gamma * n + 1e-9)));
    EXPECT_EQ(budget_count(gamma, n), plan.targets.size());
  }
  EXPECT_EQ(budget_count(0.1, 30), 3u);  // 0.1 * 30 rounds to 3.0000000000000004
  EXPECT_EQ(budget_count(0.7, 10), 7u);  // and 0.7 * 10 to 6.999999999999999
}

TEST(Plan, TextRoundTrip) {
  const std::vector<NodeId> ids{4, 8, 15};
  const std::vector<double> sc{0.25, 0.125, 0.5};
  const auto plan = select_targets(ids, sc, 0.34, Policy::kImportance, 9);
  std::stringstream ss;
  write_plan(ss, plan);
  const auto back = read_plan(ss);
  EXPECT_EQ(back.policy, Policy::kImportance);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_DOUBLE_EQ(back.gamma, 0.34);
  EXPECT_EQ(back.candidates, plan.candidates);
  EXPECT_EQ(back.scores, plan.scores);
  EXPECT_EQ(back.targets, plan.targets);
}

TEST(Plan, PolicyNames) {
  for (auto p : {Policy::kQueryEdgeRatio, Policy::kImportance, Policy::kRandom, Policy::kOracle})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_THROW(parse_policy("greedy"), InvalidArgument);
}

TEST(OptimalProbabilities, HandExamples) {
  EXPECT_EQ(optimal_probabilities(std::vector<double>{2, 2, 2, 2}, 0.5), (std::vector<double>(4, 0.125)));
  const auto p = optimal_probabilities(std::vector<double>{3, 1}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], 0.75);
  EXPECT_DOUBLE_EQ(p[1], 0.25);
  const auto c = optimal_probabilities(std::vector<double>{10, 1, 1}, 1.5);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 0.25);
  EXPECT_DOUBLE_EQ(c[2], 0.25);
  EXPECT_THROW(optimal_probabilities(std::vector<double>{0, 0}, 1.0), InvalidArgument);
  EXPECT_THROW(optimal_probabilities(std::vector<double>{1, 1}, 3.0), InvalidArgument);
}

TEST(OptimalProbabilities, CascadingClampsConserveBudget) {
  const std::vector<double> norms{100, 50, 10, 1, 1};
  const auto p = optimal_probabilities(norms, 3.0);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 3.0, 1e-12);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 1.0);
  EXPECT_NEAR(p[2], 10.0 / 12.0, 1e-12);
  for (double x : p) EXPECT_LE(x, 1.0);
}

TEST(Estimator, CertainRecomputationHasNoVariance) {
  const auto inst = random_estimator_instance(4, 3, 2, 1);
  const std::vector<double> ones(4, 1.0);
  EXPECT_EQ(analytic_variance(inst, ones), 0.0);
  const auto r = estimator_variance_suite(inst, ones, 100, 2);
  EXPECT_LT(r.empirical_variance, 1e-20);
  EXPECT_LT(r.mean_error_norm, 1e-12);
}

TEST(Estimator, UnitVectorAtHalfProbability) {
  EstimatorInstance inst;
  inst.dim = 2;
  inst.layers = 1;
  inst.q = {{1.0, 0.0}};
  inst.t = {{0.0, 0.0}};
  EXPECT_DOUBLE_EQ(analytic_variance(inst, std::vector<double>{0.5}), 1.0);
}

TEST(Estimator, MonteCarloMatchesAnalyticVariance) {
  const auto inst = random_estimator_instance(5, 4, 3, 11);
  const auto p = optimal_probabilities(query_norms(inst), 2.5);
  const auto r = estimator_variance_suite(inst, p, 100000, 3);
  EXPECT_NEAR(r.empirical_variance / r.analytic_variance, 1.0, 0.02);
}

TEST(Estimator, MeanErrorWithinThreeSigma) {
  const auto inst = random_estimator_instance(5, 3, 2, 4);
  const std::vector<double> p{0.3, 0.5, 0.7, 0.4, 0.6};
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const auto r = estimator_variance_suite(inst, p, n, 17);
    EXPECT_LT(r.mean_error_norm, 3.0 * std::sqrt(r.analytic_variance / static_cast<double>(n)));
  }
}

TEST(Estimator, OptimalProbabilitiesBeatTheGrid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t R = 2 + seed % 3;
    const auto inst = random_estimator_instance(R, 2, 2 + seed % 2, seed);
    const double gamma = 0.45 * static_cast<double>(R);
    const auto p = optimal_probabilities(query_norms(inst), gamma);
    const double s_opt = analytic_variance(inst, p);
    const double grid = grid_min_variance(inst, gamma);
    EXPECT_NEAR(grid, brute_grid_min(inst, static_cast<int>(std::lround(gamma / 0.05))), 1e-9 * grid);
    EXPECT_LE(s_opt, grid + 1e-9);
  }
}

TEST(Estimator, RejectsZeroProbability) {
  const auto inst = random_estimator_instance(2, 2, 2, 0);
  EXPECT_THROW(estimator_variance_suite(inst, std::vector<double>{0.0, 0.5}, 10, 1), InvalidArgument);
}

TEST(Estimator, InstanceFromRequestSumsToMeanAggregate) {
  // q + t over all candidates equals the sum of the candidates' mean
  // aggregates of layer-1 messages in the serving graph.
  const auto inst = fixtures::random_instance(120, 5, 3, 5, 6);
  const auto m = make_model(LayerKind::kSageMean, 2, 3, 3);
  const auto w = init_weights(m, 2);
  const auto est = estimator_instance_from_request(inst.dataset(), inst.request, m, w);
  const auto c = find_candidates(inst.request, inst.dataset());
  ASSERT_EQ(est.num_candidates(), c.size());
  std::vector<double> want(3, 0.0);
  std::vector<std::vector<NodeId>> in(inst.dataset().num_nodes());
  for (NodeId v = 0; v < inst.dataset().num_nodes(); ++v) {
    const auto nb = inst.dataset().in_csr.in_neighbors(v);
    in[v].assign(nb.begin(), nb.end());
  }
  for (const auto& e : inst.request.edges)
    if (!inst.request.is_query(e.dst)) in[e.dst].push_back(e.src);
  for (auto u : c.ids)
    for (auto v : in[u]) {
      const auto row = v < inst.dataset().num_nodes() ? inst.dataset().features.row(v)
                                                      : inst.request.query_features.row(v - inst.request.num_nodes);
      for (std::size_t j = 0; j < 3; ++j) want[j] += row[j] / static_cast<double>(in[u].size());
    }
  const auto f = estimator_target(est);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(f[j], want[j], 1e-9);
}

TEST(ApproximationError, EuclideanNormOfTheGap) {
  PeStore pe;
  pe.layers.push_back(DenseMatrix(2, 2, {1.0f, 1.0f, 0.5f, 0.5f}));
  std::vector<DenseMatrix> full{DenseMatrix(2, 2, {4.0f, 5.0f, 0.5f, 0.5f})};
  const std::vector<NodeId> ids{0, 1};
  EXPECT_EQ(approximation_error(full, pe, ids), (std::vector<double>{5.0, 0.0}));
}

TEST(ApproximationError, NodesOutsideTheQueryReachAreExact) {
  const auto inst = fixtures::random_instance(200, 3, 3, 2, 14);
  const auto m = make_model(LayerKind::kSageMean, 2, 3, 4);
  const auto w = init_weights(m, 1);
  const auto pe = precompute_embeddings(inst.dataset(), m, w);
  const auto full = forward_serving_graph(m, w, inst.dataset(), inst.request, 1);
  const auto c = find_candidates(inst.request, inst.dataset());
  std::vector<NodeId> others;
  for (NodeId v = 0; v < inst.dataset().num_nodes(); ++v)
    if (!std::binary_search(c.ids.begin(), c.ids.end(), v)) others.push_back(v);
  for (double e : approximation_error(full, pe, others)) EXPECT_EQ(e, 0.0);
  // ReLU may clip a single candidate's change; the set as a whole moves.
  const auto ce = approximation_error(full, pe, c.ids);
  EXPECT_GT(std::accumulate(ce.begin(), ce.end(), 0.0), 0.0);
}

TEST(ApproximationError, LayerCountMismatchThrows) {
  PeStore pe;
  pe.layers.push_back(DenseMatrix(1, 2));
  pe.layers.push_back(DenseMatrix(1, 2));
  std::vector<DenseMatrix> full{DenseMatrix(1, 2)};
  const std::vector<NodeId> ids{0};
  EXPECT_THROW(approximation_error(full, pe, ids), InvalidArgument);
}
