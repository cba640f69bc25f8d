#include "gnnserve/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gnnserve/dataset_io.hpp"

namespace gnnserve {

namespace {

DenseMatrix normal_features(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  DenseMatrix f(n, dim);
  for (auto& x : f.data()) x = normal(rng);
  return f;
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> split_masks(std::size_t n, std::mt19937_64& rng) {
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n)));
  std::vector<std::uint8_t> train_mask(n, 0), test_mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) (i < train ? train_mask : test_mask)[order[i]] = 1;
  return {train_mask, test_mask};
}

}  // namespace

GraphDataset gen_powerlaw_graph(std::size_t n, double avg_degree, double exponent, std::size_t feature_dim,
                                std::uint64_t seed) {
  require(n >= 2, "gen_powerlaw_graph: n must be >= 2");
  require(avg_degree >= 1.0, "gen_powerlaw_graph: avg_degree must be >= 1");
  require(exponent > 1.0, "gen_powerlaw_graph: exponent must be > 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cap = static_cast<double>(n - 1);

  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> raw(n);
    for (auto& r : raw) r = std::min(cap, std::pow(1.0 - unit(rng), -1.0 / (exponent - 1.0)));
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);
    std::vector<std::uint64_t> deg(n);
    for (std::size_t v = 0; v < n; ++v)
      deg[v] = static_cast<std::uint64_t>(std::clamp(std::round(raw[v] * avg_degree / mean), 1.0, cap));
    if (std::accumulate(deg.begin(), deg.end(), std::uint64_t{0}) % 2 == 1) {
      // Parity fix on a random node that still has room.
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (;;) {
        auto& d = deg[pick(rng)];
        if (d < n - 1) {
          ++d;
          break;
        }
        if (d > 1) {
          --d;
          break;
        }
      }
    }
    std::vector<NodeId> stubs;
    for (std::size_t v = 0; v < n; ++v) stubs.insert(stubs.end(), deg[v], v);
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::vector<Edge> edges;
    edges.reserve(stubs.size());
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      if (stubs[i] == stubs[i + 1]) continue;
      edges.push_back({stubs[i], stubs[i + 1]});
      edges.push_back({stubs[i + 1], stubs[i]});
    }
    if (edges.empty()) continue;
    auto csr = build_csr(edges, n);
    auto features = normal_features(n, feature_dim, rng);
    auto [train, test] = split_masks(n, rng);
    return make_dataset(std::move(csr), std::move(features), std::move(train), std::move(test));
  }
  throw InvalidArgument("gen_powerlaw_graph: could not realize a degree sequence");
}

GraphDataset gen_random_graph(std::size_t n, double avg_degree, std::size_t feature_dim, std::uint64_t seed) {
  require(n >= 2, "gen_random_graph: n must be >= 2");
  require(avg_degree >= 0.0, "gen_random_graph: avg_degree must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<NodeId> node(0, n - 1);
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * avg_degree));
  std::vector<Edge> edges;
  edges.reserve(m);
  while (edges.size() < m) {
    const NodeId a = node(rng), b = node(rng);
    if (a != b) edges.push_back({a, b});
  }
  auto csr = build_csr(edges, n);
  auto features = normal_features(n, feature_dim, rng);
  auto [train, test] = split_masks(n, rng);
  return make_dataset(std::move(csr), std::move(features), std::move(train), std::move(test));
}

HoldoutSplit split_holdout(const GraphDataset& dataset, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0 + 1e-12, "split_holdout: fraction must lie in (0, 1]");
  auto test = dataset.test_nodes();
  require(!test.empty(), "split_holdout: dataset has no test nodes");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(test.size())));
  require(count >= 1, "split_holdout: fraction leaves the holdout pool empty");

  std::mt19937_64 rng(seed);
  std::shuffle(test.begin(), test.end(), rng);
  std::vector<NodeId> held(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(held.begin(), held.end());

  const auto n = dataset.num_nodes();
  HoldoutSplit out;
  out.new_id.assign(n, HoldoutSplit::kRemoved);
  std::vector<std::int64_t> pool_row(n, -1);
  for (std::size_t i = 0; i < held.size(); ++i) pool_row[held[i]] = static_cast<std::int64_t>(i);
  std::size_t next = 0;
  for (NodeId v = 0; v < n; ++v)
    if (pool_row[v] < 0) out.new_id[v] = next++;
  const auto survivors = next;

  // Serving graph: edges between survivors only.
  std::vector<Edge> edges;
  for (NodeId v = 0; v < n; ++v) {
    if (out.new_id[v] == HoldoutSplit::kRemoved) continue;
    for (NodeId u : dataset.in_csr.in_neighbors(v))
      if (out.new_id[u] != HoldoutSplit::kRemoved) edges.push_back({out.new_id[u], out.new_id[v]});
  }
  DenseMatrix features(survivors, dataset.feature_dim());
  std::vector<std::uint8_t> train(survivors), testm(survivors);
  for (NodeId v = 0; v < n; ++v) {
    const auto nv = out.new_id[v];
    if (nv == HoldoutSplit::kRemoved) continue;
    std::copy_n(dataset.features.row(v).begin(), dataset.feature_dim(), features.row(nv).begin());
    train[nv] = dataset.train_mask[v];
    testm[nv] = dataset.test_mask[v];
  }
  out.serving = make_dataset(build_csr(edges, survivors), std::move(features), std::move(train), std::move(testm));

  // Pool: features plus every incident edge, endpoints in serving/pool ids.
  auto& pool = out.pool;
  pool.num_serving = survivors;
  pool.original_ids = held;
  pool.features = DenseMatrix(held.size(), dataset.feature_dim());
  auto endpoint = [&](NodeId v) {
    return pool_row[v] >= 0 ? survivors + static_cast<NodeId>(pool_row[v]) : out.new_id[v];
  };
  std::vector<std::vector<NodeId>> outs(held.size());
  for (NodeId v = 0; v < n; ++v)
    for (NodeId u : dataset.in_csr.in_neighbors(v))
      if (pool_row[u] >= 0) outs[static_cast<std::size_t>(pool_row[u])].push_back(endpoint(v));
  for (std::size_t i = 0; i < held.size(); ++i) {
    std::copy_n(dataset.features.row(held[i]).begin(), dataset.feature_dim(), pool.features.row(i).begin());
    for (NodeId u : dataset.in_csr.in_neighbors(held[i])) pool.in_endpoints.push_back(endpoint(u));
    pool.in_offsets.push_back(pool.in_endpoints.size());
    pool.out_endpoints.insert(pool.out_endpoints.end(), outs[i].begin(), outs[i].end());
    pool.out_offsets.push_back(pool.out_endpoints.size());
  }
  return out;
}

ServingRequest make_request(const HoldoutPool& pool, const GraphDataset& serving, std::size_t batch_size,
                            std::uint64_t seed, bool query_query_edges) {
  require(pool.num_serving == serving.num_nodes(), "make_request: pool was built for a different serving graph");
  require(batch_size <= pool.size(), "make_request: batch size exceeds the holdout pool");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(batch_size);

  const auto n = serving.num_nodes();
  std::vector<std::int64_t> query_of(pool.size(), -1);
  for (std::size_t i = 0; i < batch_size; ++i) query_of[order[i]] = static_cast<std::int64_t>(i);

  ServingRequest req;
  req.num_nodes = n;
  req.query_features = DenseMatrix(batch_size, pool.features.cols());
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto row = order[i];
    std::copy_n(pool.features.row(row).begin(), pool.features.cols(), req.query_features.row(i).begin());
    const NodeId q = n + i;
    std::vector<NodeId> nbrs(pool.in_endpoints.begin() + static_cast<std::ptrdiff_t>(pool.in_offsets[row]),
                             pool.in_endpoints.begin() + static_cast<std::ptrdiff_t>(pool.in_offsets[row + 1]));
    nbrs.insert(nbrs.end(), pool.out_endpoints.begin() + static_cast<std::ptrdiff_t>(pool.out_offsets[row]),
                pool.out_endpoints.begin() + static_cast<std::ptrdiff_t>(pool.out_offsets[row + 1]));
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    for (NodeId u : nbrs) {
      if (u < n) {
        req.edges.push_back({q, u});
        req.edges.push_back({u, q});
      } else if (query_query_edges) {
        const auto other = query_of[u - n];
        if (other >= 0 && static_cast<std::size_t>(other) != i) req.edges.push_back({n + static_cast<NodeId>(other), q});
      }
    }
  }
  return req;
}

void save_pool(const std::filesystem::path& dir, const HoldoutPool& pool) {
  std::filesystem::create_directories(dir);
  write_meta(dir / "meta", {{"num_serving", std::to_string(pool.num_serving)},
                            {"size", std::to_string(pool.size())},
                            {"feature_dim", std::to_string(pool.features.cols())}});
  write_u64_file(dir / "original_ids.bin", pool.original_ids);
  write_f32_file(dir / "features.bin", pool.features.data());
  write_u64_file(dir / "in_offsets.bin", pool.in_offsets);
  write_u64_file(dir / "in_endpoints.bin", pool.in_endpoints);
  write_u64_file(dir / "out_offsets.bin", pool.out_offsets);
  write_u64_file(dir / "out_endpoints.bin", pool.out_endpoints);
}

HoldoutPool load_pool(const std::filesystem::path& dir) {
  const auto meta = read_meta(dir / "meta");
  HoldoutPool pool;
  pool.num_serving = std::stoull(meta.at("num_serving"));
  const auto size = std::stoull(meta.at("size"));
  const auto dim = std::stoull(meta.at("feature_dim"));
  pool.original_ids = read_u64_file(dir / "original_ids.bin");
  auto feats = read_f32_file(dir / "features.bin");
  if (pool.original_ids.size() != size || feats.size() != size * dim) throw FormatError("holdout pool: size mismatch");
  pool.features = DenseMatrix(size, dim, std::move(feats));
  pool.in_offsets = read_u64_file(dir / "in_offsets.bin");
  pool.in_endpoints = read_u64_file(dir / "in_endpoints.bin");
  pool.out_offsets = read_u64_file(dir / "out_offsets.bin");
  pool.out_endpoints = read_u64_file(dir / "out_endpoints.bin");
  if (pool.in_offsets.size() != size + 1 || pool.out_offsets.size() != size + 1 ||
      pool.in_offsets.back() != pool.in_endpoints.size() || pool.out_offsets.back() != pool.out_endpoints.size())
    throw FormatError("holdout pool: adjacency offsets are inconsistent");
  return pool;
}

}  // namespace gnnserve
