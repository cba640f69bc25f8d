#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnnserve/collectives.hpp"
#include "gnnserve/model.hpp"
#include "gnnserve/partial.hpp"
#include "gnnserve/request.hpp"

namespace gnnserve {

/// Layer configurations covering every merge function.
struct MergeCase {
  std::string name;
  LayerKind kind;
  double power = 1.0;
  int moment = 2;
};
std::vector<MergeCase> merge_cases();

/// Max abs difference between execute_model over P shards and forward_full
/// over the centralized SRPE graph with the same (randomly chosen) targets.
double cgp_equivalence_error(const GraphDataset& dataset, const ServingRequest& request, const ModelSpec& model,
                             const Weights& weights, std::uint32_t num_partitions, double gamma, std::uint64_t seed,
                             TransportKind transport = TransportKind::kSim,
                             WirePrecision precision = WirePrecision::kF32);

struct VerifyOptions {
  std::uint32_t num_partitions = 2;
  std::uint64_t seed = 0;
  std::size_t num_graphs = 3;
  TransportKind transport = TransportKind::kSim;
  double tolerance = 1e-5;
};

struct VerifyReport {
  std::string suite;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  std::vector<std::string> lines;  // case,max_error,status

  bool passed() const { return failures == 0; }
};

/// Suites: cgp-equivalence, srpe-exactness, sampling, estimator.
VerifyReport run_verify_suite(const std::string& suite, const VerifyOptions& options);
std::vector<std::string> verify_suite_names();

}  // namespace gnnserve
