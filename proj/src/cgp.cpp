#include "gnnserve/cgp.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>

#include "gnnserve/layer.hpp"

namespace gnnserve {

namespace {

using Clock = std::chrono::steady_clock;

template <typename U>
void put(Bytes& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get(const Bytes& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw TransportError("record truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

std::string layer_tag(std::size_t l, const char* what) { return "l" + std::to_string(l) + "." + what; }

// Rows of the destinations owned by each rank, concatenated in destination
// order, shared with every rank.
DenseMatrix all_gather_owned_rows(World& world, const ComputationBlock& block, const DenseMatrix& rows,
                                  const std::string& tag) {
  Bytes local;
  for (std::size_t d = 0; d < block.num_dst(); ++d) {
    if (block.dst_owner[d] != world.rank()) continue;
    for (float x : rows.row(d)) put(local, std::bit_cast<std::uint32_t>(x));
  }
  auto all = world.all_gather(local, tag);
  DenseMatrix out(block.num_dst(), rows.cols());
  std::vector<std::size_t> pos(world.size(), 0);
  for (std::size_t d = 0; d < block.num_dst(); ++d) {
    const auto owner = block.dst_owner[d];
    for (auto& x : out.row(d)) x = std::bit_cast<float>(get<std::uint32_t>(all[owner], pos[owner]));
  }
  return out;
}

// Route one partial per destination to its owner and return, for each owned
// destination in order, the partials from ranks 0..P-1.
std::vector<std::vector<PartialAggregate>> shuffle_partials(World& world, const ComputationBlock& block,
                                                            const std::vector<PartialAggregate>& partials,
                                                            std::size_t width, WirePrecision precision,
                                                            const std::string& tag) {
  const auto P = world.size();
  std::vector<Bytes> outgoing(P);
  for (std::size_t d = 0; d < block.num_dst(); ++d)
    encode_partials(std::span(&partials[d], 1), precision, outgoing[block.dst_owner[d]]);
  auto incoming = world.all_to_all(std::move(outgoing), tag);

  std::vector<std::size_t> owned;
  for (std::size_t d = 0; d < block.num_dst(); ++d)
    if (block.dst_owner[d] == world.rank()) owned.push_back(d);
  std::vector<std::vector<PartialAggregate>> grouped(owned.size());
  for (std::uint32_t j = 0; j < P; ++j) {
    auto recs = decode_partials(incoming[j], width);
    if (recs.size() != owned.size()) throw TransportError("shuffle: rank " + std::to_string(j) + " sent a wrong record count");
    for (std::size_t i = 0; i < owned.size(); ++i) {
      if (recs[i].dst != block.dst_ids[owned[i]]) throw TransportError("shuffle: destination order mismatch");
      grouped[i].push_back(std::move(recs[i]));
    }
  }
  return grouped;
}

}  // namespace

std::vector<PartialAggregate> local_aggregate(const LayerSpec& layer, const LayerWeights& w,
                                              const ComputationBlock& block, const DenseMatrix& src_inputs,
                                              MergeKind kind, const DenseMatrix* dst_rows,
                                              std::span<const double> means) {
  const std::size_t md = layer.message_dim();
  const auto msgs = compute_messages(layer, w, block, src_inputs);
  auto msg = [&](std::size_t s) { return std::span<const double>(msgs.data() + s * md, md); };
  if (kind == MergeKind::kSoftmax)
    require(dst_rows != nullptr && dst_rows->rows() == block.num_dst(), "local_aggregate: GAT needs destination rows");
  if (kind == MergeKind::kMoments)
    require(means.size() == block.num_dst() * md, "local_aggregate: moments pass needs destination means");

  std::vector<PartialAggregate> out(block.num_dst());
  std::vector<double> logits;
  for (std::size_t d = 0; d < block.num_dst(); ++d) {
    auto& p = out[d];
    p.dst = block.dst_ids[d];
    p.kind = kind;
    p.payload.assign(md, 0.0);
    const auto edges = block.in_edges(d);
    p.count = edges.size();
    if (edges.empty()) continue;
    switch (kind) {
      case MergeKind::kSum:
      case MergeKind::kMean:
      case MergeKind::kMomentsMean:
        for (auto s : edges) {
          auto m = msg(s);
          for (std::size_t j = 0; j < md; ++j) p.payload[j] += m[j];
        }
        break;
      case MergeKind::kMax:
        std::fill(p.payload.begin(), p.payload.end(), -std::numeric_limits<double>::infinity());
        for (auto s : edges) {
          auto m = msg(s);
          for (std::size_t j = 0; j < md; ++j) p.payload[j] = std::max(p.payload[j], m[j]);
        }
        break;
      case MergeKind::kPowerMean:
        for (auto s : edges) {
          auto m = msg(s);
          for (std::size_t j = 0; j < md; ++j) p.payload[j] += std::pow(m[j], layer.power);
        }
        break;
      case MergeKind::kMoments: {
        const double* mean = means.data() + d * md;
        for (auto s : edges) {
          auto m = msg(s);
          for (std::size_t j = 0; j < md; ++j) p.payload[j] += int_pow(m[j] - mean[j], layer.moment);
        }
        break;
      }
      case MergeKind::kSoftmax: {
        const double dst_term = attention_dst_term(w, dst_rows->row(d));
        logits.clear();
        double top = -std::numeric_limits<double>::infinity();
        for (auto s : edges) {
          logits.push_back(attention_logit(attention_src_term(w, msg(s)), dst_term));
          top = std::max(top, logits.back());
        }
        p.max_logit = top;
        for (std::size_t e = 0; e < edges.size(); ++e) {
          const double a = std::exp(logits[e] - top);
          p.exp_sum += a;
          auto m = msg(edges[e]);
          for (std::size_t j = 0; j < md; ++j) p.payload[j] += a * m[j];
        }
        break;
      }
    }
  }
  return out;
}

DenseMatrix execute_layer(World& world, std::size_t l, const LayerSpec& layer, const LayerWeights& w,
                          const ComputationBlock& block, const DenseMatrix& src_inputs, const DenseMatrix& dst_self,
                          const CgpOptions& options) {
  require(block.dst_owner.size() == block.num_dst(), "execute_layer: block has no destination ownership");
  require(dst_self.rows() == block.num_dst(), "execute_layer: dst_self rows != destination count");
  for (auto o : block.dst_owner) require(o < world.size(), "execute_layer: destination owner out of range");
  const std::size_t md = layer.message_dim();
  const auto kind = merge_kind(layer.kind);

  DenseMatrix dst_rows;
  if (kind == MergeKind::kSoftmax) dst_rows = all_gather_owned_rows(world, block, dst_self, layer_tag(l, "gat_dst"));

  std::vector<double> means;
  if (kind == MergeKind::kMoments) {
    auto first = local_aggregate(layer, w, block, src_inputs, MergeKind::kMomentsMean);
    // Odd-order roots amplify any error in the mean, so this pass is always wide.
    auto grouped = shuffle_partials(world, block, first, md, WirePrecision::kF64, layer_tag(l, "moments_mean"));
    Bytes local;
    for (const auto& parts : grouped)
      for (double x : merge_mean(parts, md)) put(local, std::bit_cast<std::uint64_t>(x));
    auto all = world.all_gather(local, layer_tag(l, "means"));
    means.resize(block.num_dst() * md);
    std::vector<std::size_t> pos(world.size(), 0);
    for (std::size_t d = 0; d < block.num_dst(); ++d) {
      const auto owner = block.dst_owner[d];
      for (std::size_t j = 0; j < md; ++j)
        means[d * md + j] = std::bit_cast<double>(get<std::uint64_t>(all[owner], pos[owner]));
    }
  }

  auto partials = local_aggregate(layer, w, block, src_inputs, kind, dst_rows.rows() ? &dst_rows : nullptr, means);
  auto grouped = shuffle_partials(world, block, partials, md, options.precision, layer_tag(l, "partials"));

  DenseMatrix out(block.num_dst(), layer.out_dim);
  std::size_t i = 0;
  for (std::size_t d = 0; d < block.num_dst(); ++d) {
    if (block.dst_owner[d] != world.rank()) continue;
    const auto agg = merge_partials(grouped[i++], layer, md);
    apply_update(layer, w, dst_self.row(d), agg, out.row(d));
  }
  return out;
}

DenseMatrix execute_model(World& world, const ComputationGraph& shard, const ModelSpec& model,
                          const Weights& weights, const InputProvider& inputs, const CgpOptions& options,
                          ExecTiming* timing) {
  model.validate();
  check_weights(model, weights);
  require(shard.num_layers() == model.num_layers(), "execute_model: shard depth != model depth");
  const auto out_dim = model.layers.back().out_dim;
  if (shard.query_ids.empty()) return DenseMatrix(0, out_dim);

  Bytes digest;
  put(digest, structure_digest(shard));
  for (const auto& d : world.all_gather(digest, "digest"))
    if (d != digest) throw InvalidArgument("execute_model: partition shards are inconsistent");

  const auto me = world.rank();
  DenseMatrix prev;
  for (std::size_t l = 1; l <= model.num_layers(); ++l) {
    const auto& spec = model.layer(l);
    const auto& block = shard.block(l);
    const DenseMatrix* prev_ptr = l > 1 ? &prev : nullptr;
    const auto t0 = Clock::now();
    auto src = gather_inputs(block.src_ids, block.src_bindings, spec.in_dim, inputs, prev_ptr);

    DenseMatrix self(block.num_dst(), spec.in_dim);
    for (std::size_t d = 0; d < block.num_dst(); ++d) {
      if (block.dst_owner[d] != me) continue;
      auto row = gather_inputs(std::span(&block.dst_ids[d], 1), std::span(&block.dst_bindings[d], 1), spec.in_dim,
                               inputs, prev_ptr);
      std::copy(row.data().begin(), row.data().end(), self.row(d).begin());
    }
    const auto t1 = Clock::now();
    prev = execute_layer(world, l, spec, weights.layer(l), block, src, self, options);
    if (timing) {
      timing->gather_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      timing->compute_ms += std::chrono::duration<double, std::milli>(Clock::now() - t1).count();
    }
  }

  // Gather the owned query rows on rank 0.
  const auto& last = shard.blocks.back();
  std::vector<Bytes> outgoing(world.size());
  for (std::size_t d = 0; d < last.num_dst(); ++d) {
    if (last.dst_owner[d] != me) continue;
    put(outgoing[0], static_cast<std::uint64_t>(d));
    for (float x : prev.row(d)) put(outgoing[0], std::bit_cast<std::uint32_t>(x));
  }
  auto incoming = world.all_to_all(std::move(outgoing), "output");
  if (me != 0) return DenseMatrix(0, out_dim);
  DenseMatrix result(last.num_dst(), out_dim);
  std::vector<std::uint8_t> seen(last.num_dst(), 0);
  for (const auto& bytes : incoming) {
    std::size_t pos = 0;
    while (pos < bytes.size()) {
      const auto d = get<std::uint64_t>(bytes, pos);
      if (d >= last.num_dst() || seen[d]) throw TransportError("output gather: bad row index");
      seen[d] = 1;
      for (auto& x : result.row(d)) x = std::bit_cast<float>(get<std::uint32_t>(bytes, pos));
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw TransportError("output gather: missing query rows");
  return result;
}

std::vector<NodeId> select_targets_cgp(World& world, const PartitionedRequest& request, const LocalPartition& part,
                                       Policy policy, double gamma, std::uint64_t seed) {
  require(policy != Policy::kOracle, "the oracle policy needs full embeddings and is not available under CGP");
  budget_count(gamma, 0);  // validates gamma

  // Owned training nodes that receive query edges, with their statistics.
  std::vector<NodeId> owned_cands;
  for (const auto& [v, cnt] : request.request_in_degree)
    if (v < request.num_nodes && cnt > 0) owned_cands.push_back(v);
  std::sort(owned_cands.begin(), owned_cands.end());
  Bytes local;
  for (NodeId v : owned_cands) {
    const auto row = part.row_of(v);
    require(row.has_value(), "select_targets_cgp: candidate " + std::to_string(v) + " is not owned here");
    put(local, v);
    put(local, request.request_in_degree.at(v));
    put(local, part.in_degree[*row]);
    put(local, std::bit_cast<std::uint64_t>(part.importance[*row]));
  }

  struct Rec {
    NodeId id;
    std::uint32_t nq, indeg;
    double importance;
  };
  std::vector<Rec> all;
  for (const auto& bytes : world.all_gather(local, "candidates")) {
    std::size_t pos = 0;
    while (pos < bytes.size()) {
      Rec r;
      r.id = get<std::uint64_t>(bytes, pos);
      r.nq = get<std::uint32_t>(bytes, pos);
      r.indeg = get<std::uint32_t>(bytes, pos);
      r.importance = std::bit_cast<double>(get<std::uint64_t>(bytes, pos));
      all.push_back(r);
    }
  }
  std::sort(all.begin(), all.end(), [](const Rec& a, const Rec& b) { return a.id < b.id; });

  std::vector<NodeId> ids;
  std::vector<double> scores;
  for (const auto& r : all) {
    ids.push_back(r.id);
    switch (policy) {
      case Policy::kQueryEdgeRatio: scores.push_back(static_cast<double>(r.nq) / (r.indeg + r.nq)); break;
      case Policy::kImportance: scores.push_back(r.importance); break;
      case Policy::kRandom: scores.push_back(random_score(r.id, seed)); break;
      case Policy::kOracle: break;
    }
  }
  const auto plan = select_targets(ids, scores, gamma, policy, seed);

  Bytes mine;
  for (NodeId t : plan.targets)
    if (part.owns(t)) put(mine, t);
  std::vector<NodeId> targets;
  for (const auto& bytes : world.all_gather(mine, "targets")) {
    std::size_t pos = 0;
    while (pos < bytes.size()) targets.push_back(get<std::uint64_t>(bytes, pos));
  }
  std::sort(targets.begin(), targets.end());
  if (targets != plan.targets) throw TransportError("select_targets_cgp: ranks disagree on the target set");
  return targets;
}

}  // namespace gnnserve
