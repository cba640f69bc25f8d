#include "gnnserve/comp_graph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <unordered_map>

#include "gnnserve/hash.hpp"

namespace gnnserve {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kFull: return "full";
    case Strategy::kSampled: return "sampled";
    case Strategy::kSrpe: return "srpe";
    case Strategy::kPartitioned: return "srpe-cgp";
  }
  return "unknown";
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> ComputationBlock::edges() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(in_src.size());
  for (std::size_t d = 0; d < num_dst(); ++d)
    for (auto s : in_edges(d)) out.emplace_back(s, static_cast<std::uint32_t>(d));
  return out;
}

namespace {

std::optional<std::size_t> sorted_index(const std::vector<NodeId>& ids, NodeId v) {
  auto it = std::lower_bound(ids.begin(), ids.end(), v);
  if (it == ids.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::vector<NodeId> sorted_union(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::vector<NodeId> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Block over `dsts` whose in-neighbor lists are `nbrs` (ascending, may repeat).
ComputationBlock assemble(std::vector<NodeId> dsts, const std::vector<std::vector<NodeId>>& nbrs) {
  ComputationBlock b;
  b.dst_ids = std::move(dsts);
  for (const auto& list : nbrs) b.src_ids.insert(b.src_ids.end(), list.begin(), list.end());
  std::sort(b.src_ids.begin(), b.src_ids.end());
  b.src_ids.erase(std::unique(b.src_ids.begin(), b.src_ids.end()), b.src_ids.end());
  for (const auto& list : nbrs) {
    for (NodeId u : list) b.in_src.push_back(static_cast<std::uint32_t>(*sorted_index(b.src_ids, u)));
    b.in_offsets.push_back(b.in_src.size());
  }
  return b;
}

}  // namespace

std::optional<std::size_t> ComputationBlock::dst_index(NodeId v) const { return sorted_index(dst_ids, v); }
std::optional<std::size_t> ComputationBlock::src_index(NodeId v) const { return sorted_index(src_ids, v); }

void ComputationBlock::validate() const {
  if (!(in_offsets.size() == dst_ids.size() + 1)) throw InvalidArgument("block: offsets size mismatch");
  require(in_offsets.front() == 0 && in_offsets.back() == in_src.size(), "block: offsets do not cover edges");
  require(std::is_sorted(in_offsets.begin(), in_offsets.end()), "block: offsets not monotone");
  require(std::adjacent_find(src_ids.begin(), src_ids.end(), std::greater_equal<>()) == src_ids.end(),
          "block: source ids not strictly ascending");
  require(std::adjacent_find(dst_ids.begin(), dst_ids.end(), std::greater_equal<>()) == dst_ids.end(),
          "block: destination ids not strictly ascending");
  for (auto s : in_src) require(s < src_ids.size(), "block: edge source index out of range");
  require(src_bindings.size() == src_ids.size(), "block: source bindings size mismatch");
  require(dst_bindings.size() == dst_ids.size(), "block: destination bindings size mismatch");
  require(src_degree.size() == src_ids.size(), "block: source degree size mismatch");
  require(dst_owner.empty() || dst_owner.size() == dst_ids.size(), "block: destination owner size mismatch");
}

std::size_t ComputationGraph::total_sources() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.num_src();
  return n;
}

std::size_t ComputationGraph::total_edges() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.num_edges();
  return n;
}

ServingAdjacency::ServingAdjacency(const GraphDataset& dataset, const ServingRequest& request)
    : csr_(&dataset.in_csr), num_training_(dataset.num_nodes()), num_queries_(request.num_queries()) {
  require(request.num_nodes == num_training_, "serving adjacency: request built for a different graph");
  const auto total = num_total();
  std::vector<Edge> edges = request.edges;
  for (const auto& e : edges)
    require(e.src < total && e.dst < total, "serving adjacency: request edge id out of range");
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });
  req_offsets_.assign(total + 1, 0);
  for (const auto& e : edges) ++req_offsets_[e.dst + 1];
  std::partial_sum(req_offsets_.begin(), req_offsets_.end(), req_offsets_.begin());
  req_srcs_.reserve(edges.size());
  for (const auto& e : edges) req_srcs_.push_back(e.src);
}

std::span<const NodeId> ServingAdjacency::request_in(NodeId v) const {
  return {req_srcs_.data() + req_offsets_[v], req_srcs_.data() + req_offsets_[v + 1]};
}

std::vector<NodeId> ServingAdjacency::in_neighbors(NodeId v) const {
  std::vector<NodeId> out;
  if (!is_query(v)) {
    auto t = csr_->in_neighbors(v);
    out.assign(t.begin(), t.end());
  }
  auto r = request_in(v);
  out.insert(out.end(), r.begin(), r.end());
  std::inplace_merge(out.begin(), out.end() - static_cast<std::ptrdiff_t>(r.size()), out.end());
  return out;
}

std::uint32_t ServingAdjacency::in_degree(NodeId v) const {
  const std::size_t train = is_query(v) ? 0 : csr_->in_degree(v);
  return static_cast<std::uint32_t>(train + request_in(v).size());
}

namespace {

// Expands the k-hop frontier top-down; `pick` chooses the kept in-neighbors
// of a destination for block l.
template <typename Pick>
ComputationGraph build_layered(const ServingRequest& request, const ServingAdjacency& adj, std::size_t k,
                               Pick pick) {
  require(k >= 1, "computation graph: k must be >= 1");
  ComputationGraph g;
  g.query_ids = request.query_ids();
  g.blocks.resize(k);
  std::vector<NodeId> frontier = g.query_ids;
  for (std::size_t l = k; l >= 1; --l) {
    std::vector<std::vector<NodeId>> nbrs(frontier.size());
    for (std::size_t d = 0; d < frontier.size(); ++d) nbrs[d] = pick(l, frontier[d]);
    auto next = frontier;
    g.blocks[l - 1] = assemble(std::move(frontier), nbrs);
    frontier = sorted_union(next, g.blocks[l - 1].src_ids);
  }
  // Bindings: layer 1 reads raw features, higher layers read the previous
  // block's outputs (its destination list is a superset of these ids).
  for (std::size_t l = 1; l <= k; ++l) {
    auto& b = g.blocks[l - 1];
    const ComputationBlock* prev = l > 1 ? &g.blocks[l - 2] : nullptr;
    auto bind = [&](NodeId v) {
      return prev ? InputBinding::computed(*prev->dst_index(v)) : InputBinding::feature();
    };
    for (NodeId u : b.src_ids) {
      b.src_bindings.push_back(bind(u));
      b.src_degree.push_back(adj.in_degree(u));
    }
    for (NodeId v : b.dst_ids) b.dst_bindings.push_back(bind(v));
  }
  return g;
}

}  // namespace

ComputationGraph build_full_k_hop(const ServingRequest& request, const GraphDataset& dataset, std::size_t k) {
  request.validate(dataset);
  const ServingAdjacency adj(dataset, request);
  auto g = build_layered(request, adj, k, [&](std::size_t, NodeId v) { return adj.in_neighbors(v); });
  g.strategy = Strategy::kFull;
  return g;
}

ComputationGraph build_sampled(const ServingRequest& request, const GraphDataset& dataset,
                               std::span<const std::uint32_t> fanouts, std::uint64_t seed) {
  request.validate(dataset);
  require(!fanouts.empty(), "sampled: fanouts must not be empty");
  for (auto f : fanouts) require(f >= 1, "sampled: fanout must be >= 1");
  const ServingAdjacency adj(dataset, request);
  auto g = build_layered(request, adj, fanouts.size(), [&](std::size_t l, NodeId v) {
    auto all = adj.in_neighbors(v);
    const std::size_t cap = fanouts[l - 1];
    if (all.size() <= cap) return all;
    std::mt19937_64 rng(mix64(mix64(v, seed), l));
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<NodeId> kept;
    kept.reserve(cap);
    for (auto i : idx) kept.push_back(all[i]);
    return kept;
  });
  g.strategy = Strategy::kSampled;
  g.fanouts.assign(fanouts.begin(), fanouts.end());
  return g;
}

namespace {

std::vector<NodeId> normalize_targets(std::span<const NodeId> targets, std::size_t num_nodes) {
  std::vector<NodeId> t(targets.begin(), targets.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  for (NodeId v : t) if (!(v < num_nodes)) throw InvalidArgument("srpe: target " + std::to_string(v) + " is not a training node");
  return t;
}

// Shared SRPE layout. `in_nbrs(v)` returns the in-neighbors visible to the
// builder; `degree(u)` the serving-graph in-degree of a source.
template <typename Nbrs, typename Degree>
ComputationGraph build_srpe_layout(std::vector<NodeId> queries, std::vector<NodeId> targets,
                                   std::size_t num_nodes, std::size_t k, Nbrs in_nbrs, Degree degree,
                                   const std::function<void(NodeId, std::size_t)>& check_pe) {
  require(k >= 1, "srpe: k must be >= 1");
  ComputationGraph g;
  g.query_ids = queries;
  g.targets = targets;
  g.strategy = Strategy::kSrpe;
  g.blocks.resize(k);
  const auto inner = sorted_union(queries, targets);
  auto recomputed = [&](NodeId v) { return v >= num_nodes || std::binary_search(targets.begin(), targets.end(), v); };

  for (std::size_t l = 1; l <= k; ++l) {
    std::vector<NodeId> dsts = l == k ? queries : inner;
    std::vector<std::vector<NodeId>> nbrs(dsts.size());
    for (std::size_t d = 0; d < dsts.size(); ++d) nbrs[d] = in_nbrs(dsts[d]);
    auto& b = g.blocks[l - 1];
    b = assemble(std::move(dsts), nbrs);
    for (NodeId u : b.src_ids) {
      if (l == 1) {
        b.src_bindings.push_back(InputBinding::feature());
      } else if (recomputed(u)) {
        b.src_bindings.push_back(InputBinding::computed(*sorted_index(inner, u)));
      } else {
        check_pe(u, l - 1);
        b.src_bindings.push_back(InputBinding::pe(static_cast<std::uint32_t>(l - 1)));
      }
      b.src_degree.push_back(degree(u));
    }
    for (NodeId v : b.dst_ids)
      b.dst_bindings.push_back(l == 1 ? InputBinding::feature() : InputBinding::computed(*sorted_index(inner, v)));
  }
  return g;
}

}  // namespace

ComputationGraph build_srpe(const ServingRequest& request, const GraphDataset& dataset, const PeStore* pe,
                            std::size_t k, std::span<const NodeId> targets) {
  request.validate(dataset);
  const ServingAdjacency adj(dataset, request);
  const auto n = dataset.num_nodes();
  auto t = normalize_targets(targets, n);
  for (NodeId v : t)
    if (adj.request_in(v).empty()) throw InvalidArgument("srpe: target " + std::to_string(v) + " receives no query edge");
  auto check_pe = [&](NodeId u, std::size_t layer) {
    if (!(pe != nullptr && pe->has_layer(layer))) throw InvalidArgument("srpe: missing precomputed embedding layer " + std::to_string(layer));
    require(pe->layers[layer - 1].rows() == n, "srpe: PE store rows != num_nodes");
    (void)u;
  };
  return build_srpe_layout(
      request.query_ids(), std::move(t), n, k, [&](NodeId v) { return adj.in_neighbors(v); },
      [&](NodeId u) { return adj.in_degree(u); }, check_pe);
}

ComputationGraph build_partitioned(const PartitionedRequest& request, const LocalPartition& part,
                                   const PartitionMap& map, std::span<const NodeId> targets_global,
                                   std::size_t k) {
  const auto n = request.num_nodes;
  const auto P = map.num_partitions;
  require(map.owner.size() == n, "partitioned: partition map does not match the request");
  auto t = normalize_targets(targets_global, n);

  std::vector<NodeId> queries(request.num_queries_total);
  std::iota(queries.begin(), queries.end(), n);
  auto query_home = [&](NodeId q) { return static_cast<std::uint32_t>((q - n) % P); };
  auto home = [&](NodeId v) { return v >= n ? query_home(v) : map.owner_of(v); };

  // Request edges by destination; their sources all live on this partition.
  std::unordered_map<NodeId, std::vector<NodeId>> req_in;
  for (const auto& e : request.edges) {
    if (!(e.src < n + queries.size() && e.dst < n + queries.size())) throw InvalidArgument("partitioned: request edge id out of range");
    require(home(e.src) == part.index, "partitioned: request edge source is not local");
    req_in[e.dst].push_back(e.src);
  }
  for (auto& [_, v] : req_in) std::sort(v.begin(), v.end());

  auto in_nbrs = [&](NodeId v) {
    std::vector<NodeId> out;
    if (v < n) {
      auto local = part.local_in_neighbors(v);
      out.assign(local.begin(), local.end());
    }
    if (auto it = req_in.find(v); it != req_in.end()) {
      const auto mid = out.size();
      out.insert(out.end(), it->second.begin(), it->second.end());
      std::inplace_merge(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(mid), out.end());
    }
    return out;
  };
  auto req_deg = [&](NodeId u) -> std::uint32_t {
    auto it = request.request_in_degree.find(u);
    return it == request.request_in_degree.end() ? 0 : it->second;
  };
  auto degree = [&](NodeId u) -> std::uint32_t {
    if (u >= n) {
      require(request.query_row(u).has_value(), "partitioned: binding refers to a non-owned query");
      return req_deg(u);
    }
    auto row = part.row_of(u);
    if (!row.has_value()) throw InvalidArgument("partitioned: binding refers to non-owned node " + std::to_string(u));
    return part.in_degree[*row] + req_deg(u);
  };
  auto check_pe = [&](NodeId u, std::size_t layer) {
    if (!part.pe.has_layer(layer)) throw InvalidArgument("partitioned: missing precomputed embedding layer " + std::to_string(layer));
    if (!part.owns(u)) throw InvalidArgument("partitioned: PE binding for non-owned node " + std::to_string(u));
  };

  auto g = build_srpe_layout(std::move(queries), std::move(t), n, k, in_nbrs, degree, check_pe);
  g.strategy = Strategy::kPartitioned;
  for (auto& b : g.blocks)
    for (NodeId v : b.dst_ids) b.dst_owner.push_back(home(v));
  return g;
}

std::uint64_t structure_digest(const ComputationGraph& graph) {
  std::uint64_t h = mix64(graph.blocks.size(), 0x5eed);
  auto fold = [&](std::uint64_t v) { h = mix64(v ^ h, h); };
  fold(graph.query_ids.size());
  for (NodeId q : graph.query_ids) fold(q);
  fold(graph.targets.size());
  for (NodeId t : graph.targets) fold(t);
  for (const auto& b : graph.blocks) {
    fold(b.dst_ids.size());
    for (NodeId v : b.dst_ids) fold(v);
    for (auto o : b.dst_owner) fold(o);
  }
  return h;
}

}  // namespace gnnserve
