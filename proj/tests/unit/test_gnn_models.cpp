#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <unistd.h>

#include "fixtures.hpp"
#include "gnnserve/comp_graph.hpp"
#include "gnnserve/forward.hpp"
#include "gnnserve/inputs.hpp"
#include "gnnserve/layer.hpp"
#include "gnnserve/workload.hpp"
#include "oracle.hpp"

using namespace gnnserve;

namespace {

/// Block with `num_src` sources and one destination per in-list.
ComputationBlock make_block(std::size_t num_src, const std::vector<std::vector<std::uint32_t>>& in_lists) {
  ComputationBlock b;
  for (std::size_t s = 0; s < num_src; ++s) b.src_ids.push_back(s);
  for (std::size_t d = 0; d < in_lists.size(); ++d) {
    b.dst_ids.push_back(100 + d);
    for (auto s : in_lists[d]) b.in_src.push_back(s);
    b.in_offsets.push_back(b.in_src.size());
  }
  b.src_bindings.assign(num_src, InputBinding::feature());
  b.dst_bindings.assign(in_lists.size(), InputBinding::feature());
  b.src_degree.assign(num_src, 1);
  return b;
}

/// Weights that expose the aggregate: W = I, W_self = 0, b = 0.
LayerWeights passthrough(const LayerSpec& spec) {
  LayerWeights w;
  w.weight = DenseMatrix::identity(spec.in_dim);
  if (uses_self_weight(spec.kind)) w.self_weight = DenseMatrix(spec.in_dim, spec.out_dim);
  w.bias.assign(spec.out_dim, 0.0f);
  if (spec.kind == LayerKind::kGat) {
    w.att_src.assign(spec.out_dim, 0.0f);
    w.att_dst.assign(spec.out_dim, 0.0f);
  }
  return w;
}

LayerSpec spec_of(LayerKind kind, std::uint32_t dim, double power = 1.0, int moment = 2) {
  LayerSpec s;
  s.kind = kind;
  s.in_dim = s.out_dim = dim;
  s.power = power;
  s.moment = moment;
  s.activation = false;
  return s;
}

const LayerKind kAllKinds[] = {LayerKind::kGcn,       LayerKind::kSageMean, LayerKind::kSageMax,
                               LayerKind::kPowerMean, LayerKind::kMoments,  LayerKind::kGat};

}  // namespace

TEST(Layer, EveryKindMatchesNaiveOracleOnRandomGraph) {
  const auto g = gen_random_graph(30, 4, 6, 12);
  for (auto kind : kAllKinds) {
    for (double p : {0.5, 3.0}) {
      const auto m = make_model(kind, 2, 6, 5, p, p > 1 ? 3 : 2);
      const auto w = init_weights(m, 4);
      const auto got = forward_all_nodes(m, w, g.in_csr, g.features);
      const auto ref = oracle::forward_all(m, w, oracle::training_adjacency(g), oracle::to_rows(g.features));
      EXPECT_LT(oracle::max_abs_diff(ref[1], got[0]), 1e-5) << to_string(kind);
      EXPECT_LT(oracle::max_abs_diff(ref[2], got[1]), 1e-5) << to_string(kind);
    }
  }
}

TEST(Layer, PowerMeanWithUnitExponentIsMeanOfSoftplus) {
  const auto x = fixtures::random_matrix(5, 3, 2);
  DenseMatrix sp(5, 3);
  for (std::size_t i = 0; i < 15; ++i) sp.data()[i] = static_cast<float>(softplus(x.data()[i]));
  const auto block = make_block(5, {{0, 1, 4}, {2}, {}});
  const auto dst = fixtures::random_matrix(3, 3, 5);
  auto pm = make_model(LayerKind::kPowerMean, 1, 3, 3, 1.0);
  auto sage = make_model(LayerKind::kSageMean, 1, 3, 3);
  const auto w = init_weights(pm, 9);
  const auto a = layer_forward(pm.layer(1), w.layer(1), block, x, dst);
  const auto b = layer_forward(sage.layer(1), w.layer(1), block, sp, dst);
  EXPECT_LT(max_abs_diff(a, b), 1e-6);
}

TEST(Layer, SingleNeighborAggregateIsItsMessage) {
  const auto x = fixtures::random_matrix(2, 3, 7);
  const auto block = make_block(2, {{1}});
  const DenseMatrix dst(1, 3);
  for (auto kind : {LayerKind::kSageMean, LayerKind::kSageMax, LayerKind::kPowerMean, LayerKind::kMoments}) {
    const auto spec = spec_of(kind, 3, 2.0, 3);
    const auto out = layer_forward(spec, passthrough(spec), block, x, dst);
    for (std::size_t j = 0; j < 3; ++j) {
      const double m = x.at(1, j);
      const double want = kind == LayerKind::kMoments ? 0.0 : kind == LayerKind::kPowerMean ? softplus(m) : m;
      EXPECT_NEAR(out.at(0, j), want, 1e-6) << to_string(kind);
    }
  }
}

TEST(Layer, EmptyNeighborhoodAggregatesToZero) {
  const auto x = fixtures::random_matrix(2, 3, 7);
  const auto block = make_block(2, {{}});
  for (auto kind : kAllKinds) {
    const auto spec = spec_of(kind, 3, 2.0, 3);
    const auto out = layer_forward(spec, passthrough(spec), block, x, fixtures::random_matrix(1, 3, 1));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.at(0, j), 0.0f) << to_string(kind);
  }
}

TEST(Layer, GatWithEqualLogitsAveragesTransformedNeighbors) {
  const auto x = fixtures::random_matrix(4, 3, 3);
  const auto block = make_block(4, {{0, 2, 3}});
  auto m = make_model(LayerKind::kGat, 1, 3, 2);
  auto w = init_weights(m, 6);
  std::fill(w.layers[0].att_src.begin(), w.layers[0].att_src.end(), 0.0f);
  std::fill(w.layers[0].att_dst.begin(), w.layers[0].att_dst.end(), 0.0f);
  const auto out = layer_forward(m.layer(1), w.layer(1), block, x, fixtures::random_matrix(1, 3, 2));
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t s : {0, 2, 3})
      for (std::size_t i = 0; i < 3; ++i) mean += x.at(s, i) * static_cast<double>(w.layer(1).weight.at(i, j)) / 3.0;
    EXPECT_NEAR(out.at(0, j), mean + w.layer(1).bias[j], 1e-6);
  }
}

TEST(Layer, GatAttentionWeightsSumToOne) {
  // With W = I and b = 0 a constant input makes the output equal that
  // constant only if the weights sum to one.
  DenseMatrix x(6, 2, 1.5f);
  for (std::size_t s = 0; s < 6; ++s) x.at(s, 1) = 1.5f;
  const auto block = make_block(6, {{0, 1, 2, 3, 4, 5}, {5}});
  auto spec = spec_of(LayerKind::kGat, 2);
  auto w = passthrough(spec);
  w.att_src = {3.0f, -1.0f};
  w.att_dst = {0.5f, 2.0f};
  const auto out = layer_forward(spec, w, block, x, fixtures::random_matrix(2, 2, 5));
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out.at(d, j), 1.5, 1e-6);
}

TEST(Layer, MomentsIgnoreACommonShift) {
  const auto x = fixtures::random_matrix(6, 4, 8);
  auto shifted = x;
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t j = 0; j < 4; ++j) shifted.at(s, j) += static_cast<float>(0.75 * (j + 1));
  const auto block = make_block(6, {{0, 1, 2}, {3, 4, 5, 0}, {2}});
  const auto dst = fixtures::random_matrix(3, 4, 9);
  for (int n : {2, 3}) {
    const auto m = make_model(LayerKind::kMoments, 1, 4, 3, 1.0, n);
    const auto w = init_weights(m, 10);
    EXPECT_LT(max_abs_diff(layer_forward(m.layer(1), w.layer(1), block, x, dst),
                           layer_forward(m.layer(1), w.layer(1), block, shifted, dst)),
              1e-5);
  }
}

TEST(Layer, LargeExponentPowerMeanApproachesMax) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  DenseMatrix x(5, 3);
  std::vector<double> top(3, 0.0);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t j = 0; j < 3; ++j) {
      const double m = u(rng);
      top[j] = std::max(top[j], m);
      x.at(s, j) = static_cast<float>(std::log(std::expm1(m)));  // softplus^-1
    }
  const auto spec = spec_of(LayerKind::kPowerMean, 3, 64.0);
  const auto out = layer_forward(spec, passthrough(spec), make_block(5, {{0, 1, 2, 3, 4}}), x, DenseMatrix(1, 3));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out.at(0, j) / top[j], 1.0, 0.05);
}

TEST(Layer, ZeroExponentRejected) {
  auto spec = spec_of(LayerKind::kPowerMean, 2, 0.0);
  EXPECT_THROW(layer_forward(spec, passthrough(spec), make_block(1, {{0}}), DenseMatrix(1, 2), DenseMatrix(1, 2)),
               InvalidArgument);
  ModelSpec m{{spec}};
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Model, MakeModelChainsDimsAndDropsLastActivation) {
  const auto m = make_model(LayerKind::kGat, 3, 7, 4);
  ASSERT_EQ(m.num_layers(), 3u);
  EXPECT_EQ(m.layer(1).in_dim, 7u);
  EXPECT_EQ(m.layer(3).out_dim, 4u);
  EXPECT_TRUE(m.layer(2).activation);
  EXPECT_FALSE(m.layer(3).activation);
}

TEST(Model, InitWeightsBoundsAndDeterminism) {
  const auto m = make_model(LayerKind::kSageMean, 2, 9, 4);
  const auto w = init_weights(m, 3);
  EXPECT_EQ(w, init_weights(m, 3));
  EXPECT_NE(w, init_weights(m, 4));
  for (float x : w.layer(1).weight.data()) EXPECT_LE(std::abs(x), 1.0 / 3.0 + 1e-7);
}

TEST(Model, CheckWeightsRejectsWrongShapes) {
  const auto m = make_model(LayerKind::kSageMean, 2, 4, 3);
  auto w = init_weights(m, 1);
  w.layers[1].self_weight = DenseMatrix(2, 3);
  EXPECT_THROW(check_weights(m, w), InvalidArgument);
}

TEST(Model, WeightsFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / ("gnnserve_w_" + std::to_string(::getpid()) + ".bin");
  for (auto kind : kAllKinds) {
    const auto m = make_model(kind, 2, 5, 3, 2.5, 3);
    const auto w = init_weights(m, 2);
    save_weights(path, m, w);
    const auto [m2, w2] = load_weights(path);
    EXPECT_EQ(w2, w);
    ASSERT_EQ(m2.num_layers(), 2u);
    EXPECT_EQ(m2.layer(1).kind, kind);
    if (kind == LayerKind::kPowerMean) EXPECT_EQ(m2.layer(1).power, 2.5);
    if (kind == LayerKind::kMoments) EXPECT_EQ(m2.layer(2).moment, 3);
    EXPECT_EQ(m2.layer(2).activation, false);
  }
  std::filesystem::remove(path);
}

TEST(ForwardFull, OneLayerOneNeighborEqualsLayerForward) {
  const auto g = fixtures::example_graph();
  ServingRequest r;
  r.num_nodes = 8;
  r.query_features = fixtures::random_matrix(1, 4, 2);
  r.edges = {{5, 8}};
  const auto m = make_model(LayerKind::kSageMean, 1, 4, 3);
  const auto w = init_weights(m, 5);
  const auto graph = build_full_k_hop(r, g, 1);
  CentralInputs inputs(g, r);
  const auto out = forward_full(m, graph, w, inputs);
  const auto& b = graph.block(1);
  DenseMatrix src(b.num_src(), 4);
  for (std::size_t s = 0; s < b.num_src(); ++s) {
    const auto row = b.src_ids[s] < 8 ? g.features.row(b.src_ids[s]) : r.query_features.row(0);
    std::copy(row.begin(), row.end(), src.row(s).begin());
  }
  EXPECT_EQ(out, layer_forward(m.layer(1), w.layer(1), b, src, r.query_features));
}

TEST(ForwardFull, ExampleNodeZeroTwoHopShape) {
  // A query wired like node 0 of the example graph: in-neighbors 1, 2, 3.
  const auto g = fixtures::example_graph();
  ServingRequest r;
  r.num_nodes = 8;
  r.query_features = fixtures::random_matrix(1, 4, 2);
  r.edges = {{1, 8}, {2, 8}, {3, 8}};
  const auto graph = build_full_k_hop(r, g, 2);
  EXPECT_EQ(graph.block(2).src_ids, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(graph.block(2).num_edges(), 3u);
  // layer-1 destinations are the query and its neighbors
  EXPECT_EQ(graph.block(1).dst_ids, (std::vector<NodeId>{1, 2, 3, 8}));
  EXPECT_EQ(graph.block(1).src_ids, (std::vector<NodeId>{0, 1, 2, 3, 4, 5, 7}));
  const auto m = make_model(LayerKind::kGcn, 2, 4, 6);
  CentralInputs inputs(g, r);
  const auto out = forward_full(m, graph, init_weights(m, 1), inputs);
  EXPECT_EQ(out.rows(), 1u);
  EXPECT_EQ(out.cols(), 6u);
}

TEST(ForwardFull, ThreeLayerSageMatchesRecursiveOracle) {
  const auto inst = fixtures::random_instance(50, 4, 5, 4, 31);
  const auto m = make_model(LayerKind::kSageMean, 3, 5, 4);
  const auto w = init_weights(m, 2);
  CentralInputs inputs(inst.dataset(), inst.request);
  const auto out = forward_full(m, build_full_k_hop(inst.request, inst.dataset(), 3), w, inputs);
  EXPECT_LT(oracle::max_abs_diff(oracle::full_queries(m, w, inst.dataset(), inst.request), out), 1e-5);
}

TEST(ForwardFull, DepthMismatchThrows) {
  const auto inst = fixtures::random_instance(50, 4, 5, 2, 3);
  const auto m = make_model(LayerKind::kSageMean, 3, 5, 4);
  CentralInputs inputs(inst.dataset(), inst.request);
  EXPECT_THROW(forward_full(m, build_full_k_hop(inst.request, inst.dataset(), 2), init_weights(m, 1), inputs),
               InvalidArgument);
}

TEST(ForwardServingGraph, MatchesOracleOnEveryNode) {
  const auto inst = fixtures::random_instance(60, 4, 3, 5, 8);
  const auto m = make_model(LayerKind::kGat, 2, 3, 4);
  const auto w = init_weights(m, 3);
  const auto got = forward_serving_graph(m, w, inst.dataset(), inst.request);
  const auto ref = oracle::forward_all(m, w, oracle::serving_adjacency(inst.dataset(), inst.request),
                                       oracle::serving_features(inst.dataset(), inst.request));
  EXPECT_LT(oracle::max_abs_diff(ref[1], got[0]), 1e-5);
  EXPECT_LT(oracle::max_abs_diff(ref[2], got[1]), 1e-5);
}
