#include "gnnserve/policy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gnnserve/hash.hpp"

namespace gnnserve {

CandidateSet find_candidates(const ServingRequest& request, const GraphDataset& dataset) {
  std::vector<NodeId> hits;
  for (const auto& e : request.edges)
    if (request.is_query(e.src) && !request.is_query(e.dst)) hits.push_back(e.dst);
  std::sort(hits.begin(), hits.end());
  CandidateSet out;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    out.ids.push_back(hits[i]);
    out.query_edges.push_back(static_cast<std::uint32_t>(j - i));
    out.total_degree.push_back(static_cast<std::uint32_t>(dataset.in_csr.in_degree(hits[i]) + (j - i)));
    i = j;
  }
  return out;
}

std::string to_string(Policy p) {
  switch (p) {
    case Policy::kQueryEdgeRatio: return "ratio";
    case Policy::kImportance: return "is";
    case Policy::kRandom: return "random";
    case Policy::kOracle: return "oracle";
  }
  return "unknown";
}

Policy parse_policy(const std::string& name) {
  if (name == "ratio") return Policy::kQueryEdgeRatio;
  if (name == "is") return Policy::kImportance;
  if (name == "random") return Policy::kRandom;
  if (name == "oracle") return Policy::kOracle;
  throw InvalidArgument("unknown policy '" + name + "'");
}

std::vector<double> score_query_edge_ratio(const CandidateSet& candidates) {
  std::vector<double> s(candidates.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(candidates.total_degree[i] >= 1, "ratio score: zero total degree");
    s[i] = static_cast<double>(candidates.query_edges[i]) / candidates.total_degree[i];
  }
  return s;
}

std::vector<double> importance_scores(const Csr& csr) {
  const auto n = csr.num_nodes();
  std::vector<double> is(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    const auto deg = csr.in_degree(v);
    if (deg == 0) continue;
    double acc = 0.0;
    for (NodeId u : csr.in_neighbors(v)) {
      const auto du = csr.in_degree(u);
      if (du > 0) acc += 1.0 / static_cast<double>(du);
    }
    is[v] = acc / static_cast<double>(deg);
  }
  return is;
}

std::vector<double> score_importance(const CandidateSet& candidates, const GraphDataset& dataset) {
  const auto& csr = dataset.in_csr;
  std::vector<double> s(candidates.size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const NodeId v = candidates.ids[i];
    const auto deg = csr.in_degree(v);
    if (deg == 0) continue;
    double acc = 0.0;
    for (NodeId u : csr.in_neighbors(v))
      if (csr.in_degree(u) > 0) acc += 1.0 / static_cast<double>(csr.in_degree(u));
    s[i] = acc / static_cast<double>(deg);
  }
  return s;
}

double random_score(NodeId v, std::uint64_t seed) {
  return static_cast<double>(mix64(v, seed) >> 11) * 0x1.0p-53;
}

std::vector<double> score_random(std::span<const NodeId> ids, std::uint64_t seed) {
  std::vector<double> s(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) s[i] = random_score(ids[i], seed);
  return s;
}

std::size_t budget_count(double gamma, std::size_t num_candidates) {
  require(gamma >= 0.0 && gamma <= 1.0, "budget gamma must lie in [0, 1]");
  const double raw = gamma * static_cast<double>(num_candidates);
  return std::min(num_candidates, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

RecomputationPlan select_targets(std::span<const NodeId> ids, std::span<const double> scores, double gamma,
                                 Policy policy, std::uint64_t seed) {
  require(ids.size() == scores.size(), "select_targets: score count != candidate count");
  const auto budget = budget_count(gamma, ids.size());
  RecomputationPlan plan;
  plan.policy = policy;
  plan.gamma = gamma;
  plan.seed = seed;
  plan.candidates.assign(ids.begin(), ids.end());
  plan.scores.assign(scores.begin(), scores.end());
  plan.selected.assign(ids.size(), 0);

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  for (std::size_t i = 0; i < budget; ++i) {
    plan.selected[order[i]] = 1;
    plan.targets.push_back(ids[order[i]]);
  }
  std::sort(plan.targets.begin(), plan.targets.end());
  return plan;
}

void write_plan(std::ostream& os, const RecomputationPlan& plan) {
  os << "# policy=" << to_string(plan.policy) << " gamma=" << std::setprecision(17) << plan.gamma
     << " seed=" << plan.seed << "\n";
  os << "node,score,selected\n";
  for (std::size_t i = 0; i < plan.candidates.size(); ++i)
    os << plan.candidates[i] << ',' << std::setprecision(17) << plan.scores[i] << ',' << int(plan.selected[i]) << '\n';
}

RecomputationPlan read_plan(std::istream& is) {
  RecomputationPlan plan;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "policy") plan.policy = parse_policy(val);
        if (key == "gamma") plan.gamma = std::stod(val);
        if (key == "seed") plan.seed = std::stoull(val);
      }
      continue;
    }
    if (!header) {
      if (line != "node,score,selected") throw FormatError("plan: missing header");
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw FormatError("plan: malformed row '" + line + "'");
    plan.candidates.push_back(std::stoull(a));
    plan.scores.push_back(std::stod(b));
    plan.selected.push_back(static_cast<std::uint8_t>(std::stoi(c)));
    if (plan.selected.back()) plan.targets.push_back(plan.candidates.back());
  }
  std::sort(plan.targets.begin(), plan.targets.end());
  return plan;
}

std::vector<double> optimal_probabilities(std::span<const double> norms, double gamma) {
  const auto n = norms.size();
  require(gamma >= 0.0 && gamma <= static_cast<double>(n), "optimal_probabilities: gamma must lie in [0, |R|]");
  for (double x : norms) require(x >= 0.0 && std::isfinite(x), "optimal_probabilities: norms must be finite and >= 0");
  std::vector<double> p(n, 0.0);
  if (gamma == 0.0) return p;
  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  require(total > 0.0, "optimal_probabilities: all norms are zero");

  std::vector<std::uint8_t> fixed(n, 0);
  double budget = gamma;
  for (;;) {
    double free_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i]) free_mass += norms[i];
    bool clamped = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      p[i] = free_mass > 0.0 ? budget * norms[i] / free_mass : 0.0;
      if (p[i] >= 1.0) clamped = true;
    }
    if (!clamped) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (!fixed[i] && p[i] >= 1.0) {
        p[i] = 1.0;
        fixed[i] = 1;
        budget -= 1.0;
      }
    }
  }
  return p;
}

std::vector<double> approximation_error(std::span<const DenseMatrix> full, const PeStore& pe,
                                        std::span<const NodeId> ids) {
  const auto layers = pe.num_layers();
  require(full.size() >= layers, "approximation_error: full embeddings have fewer layers than the PE store");
  for (std::size_t l = 1; l <= layers; ++l)
    require(full[l - 1].cols() == pe.hidden_dim(l), "approximation_error: layer width mismatch");
  std::vector<double> err(ids.size(), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t l = 1; l <= layers; ++l) {
      auto f = full[l - 1].row(ids[i]);
      auto p = pe.row(l, ids[i]);
      double sq = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double d = static_cast<double>(f[j]) - static_cast<double>(p[j]);
        sq += d * d;
      }
      err[i] += std::sqrt(sq);
    }
  }
  return err;
}

}  // namespace gnnserve
