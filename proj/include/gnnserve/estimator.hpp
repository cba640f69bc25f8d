#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnnserve/graph.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/policy.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

/// Per-candidate query and training contributions to the mean-aggregated
/// embedding, for layers 1..k-1:
///   q_u^(l) = Σ_{v∈N_Q(u)} m_v^(l) / |N(u)|,  t_u^(l) = Σ_{v∈N_T(u)} m_v^(l) / |N(u)|.
/// Vectors are stored layer-major: q[u][(l - 1) * dim + i].
struct EstimatorInstance {
  std::size_t dim = 0;
  std::size_t layers = 0;  // k - 1
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> t;

  std::size_t num_candidates() const { return q.size(); }
};

/// Random instance: each candidate gets 1..3 query neighbors and 0..4
/// training neighbors with standard-normal messages per layer.
EstimatorInstance random_estimator_instance(std::size_t num_candidates, std::size_t dim, std::size_t k,
                                            std::uint64_t seed);

/// Instance from a served request: messages are the model's per-layer
/// messages of the serving-graph embeddings h^(l-1). Every layer's message
/// width must match.
EstimatorInstance estimator_instance_from_request(const GraphDataset& dataset, const ServingRequest& request,
                                                  const ModelSpec& model, const Weights& weights);

/// ||Σ_l q_u^(l)|| per candidate.
std::vector<double> query_norms(const EstimatorInstance& inst);

/// f = Σ_u Σ_l (q_u^(l) + t_u^(l)), a dim-wide vector.
std::vector<double> estimator_target(const EstimatorInstance& inst);

/// S = Σ_u ||Σ_l q_u^(l)||² (1/p_u − 1).
double analytic_variance(const EstimatorInstance& inst, std::span<const double> probabilities);

struct EstimatorSuiteResult {
  std::vector<double> mean_error;  // Monte-Carlo mean of f̂ minus f, per dimension
  double mean_error_norm = 0.0;    // ||mean_error||
  double empirical_variance = 0.0;  // Σ_i sample variance of f̂_i
  double analytic_variance = 0.0;
};

/// Draws z_u ~ Bernoulli(p_u) num_samples times and evaluates
/// f̂ = Σ_u Σ_l (z_u / p_u) q_u^(l) + t_u^(l). Throws if any p_u is outside (0, 1].
EstimatorSuiteResult estimator_variance_suite(const EstimatorInstance& inst, std::span<const double> probabilities,
                                              std::size_t num_samples, std::uint64_t seed);

/// Minimum of S over the grid {step, 2·step, ..., 1}^|R| restricted to
/// vectors whose entries sum to `gamma` (gamma must be a multiple of step).
/// Returns +inf when the grid is empty.
double grid_min_variance(const EstimatorInstance& inst, double gamma, double step = 0.05);

}  // namespace gnnserve
