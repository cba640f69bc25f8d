#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/pe_store.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

/// Training nodes that receive at least one query edge, ascending, with
/// |N_Q(u)| (query edges into u) and |N(u)| (training in-degree + |N_Q(u)|).
struct CandidateSet {
  std::vector<NodeId> ids;
  std::vector<std::uint32_t> query_edges;
  std::vector<std::uint32_t> total_degree;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

CandidateSet find_candidates(const ServingRequest& request, const GraphDataset& dataset);

enum class Policy : std::uint8_t { kQueryEdgeRatio, kImportance, kRandom, kOracle };
std::string to_string(Policy p);
Policy parse_policy(const std::string& name);  // ratio | is | random | oracle

/// |N_Q(u)| / |N(u)|.
std::vector<double> score_query_edge_ratio(const CandidateSet& candidates);

/// IS(v) = (1/deg(v)) Σ_{u∈N(v)} 1/deg(u) over training in-degrees for every
/// node. Zero-degree terms contribute 0; isolated nodes score 0.
std::vector<double> importance_scores(const Csr& csr);
std::vector<double> score_importance(const CandidateSet& candidates, const GraphDataset& dataset);

/// Stateless uniform score in [0, 1) for the RANDOM policy, so every
/// partition draws the same value for a node.
double random_score(NodeId v, std::uint64_t seed);
std::vector<double> score_random(std::span<const NodeId> ids, std::uint64_t seed);

/// floor(γ·|R|), tolerant of binary rounding in γ.
std::size_t budget_count(double gamma, std::size_t num_candidates);

struct RecomputationPlan {
  Policy policy = Policy::kQueryEdgeRatio;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::vector<NodeId> candidates;
  std::vector<double> scores;
  std::vector<std::uint8_t> selected;
  std::vector<NodeId> targets;  // ascending
};

/// Top floor(γ|R|) candidates by score, ties by ascending id. Throws when γ
/// is outside [0, 1] or the score count differs from the id count.
RecomputationPlan select_targets(std::span<const NodeId> ids, std::span<const double> scores, double gamma,
                                 Policy policy = Policy::kQueryEdgeRatio, std::uint64_t seed = 0);

/// Text form: header `node,score,selected`, one line per candidate.
void write_plan(std::ostream& os, const RecomputationPlan& plan);
RecomputationPlan read_plan(std::istream& is);

/// p_u ∝ norm_u with Σ p = γ, clamped to 1 with the excess redistributed
/// until no probability exceeds 1.
std::vector<double> optimal_probabilities(std::span<const double> norms, double gamma);

/// Σ_{l=1}^{k-1} ||f_u^(l) − p_u^(l)|| per node. full[l - 1] is indexed by
/// node id (a serving-graph forward pass), pe by the same ids.
std::vector<double> approximation_error(std::span<const DenseMatrix> full, const PeStore& pe,
                                        std::span<const NodeId> ids);

}  // namespace gnnserve
