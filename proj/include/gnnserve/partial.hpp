#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnnserve/model.hpp"
#include "gnnserve/types.hpp"

namespace gnnserve {

enum class MergeKind : std::uint8_t {
  kSum = 0,          // GCN
  kMean = 1,         // SAGE mean
  kMax = 2,          // SAGE max
  kPowerMean = 3,    // Σ m^p, count
  kMomentsMean = 4,  // first moments pass: Σ m, count
  kMoments = 5,      // second pass: Σ (m − m̄)^n, count
  kSoftmax = 6,      // max logit, Σ exp, Σ exp · z
};

/// Merge kind of a layer's main aggregation exchange.
MergeKind merge_kind(LayerKind kind);

/// One partition's contribution to one destination's aggregate. A record
/// with count 0 is the merge identity whatever its payload holds.
struct PartialAggregate {
  NodeId dst = 0;
  MergeKind kind = MergeKind::kSum;
  std::uint64_t count = 0;
  double max_logit = 0.0;  // softmax only
  double exp_sum = 0.0;    // softmax only
  std::vector<double> payload;
};

enum class WirePrecision : std::uint8_t { kF32, kF64 };

/// Wire record: dst (u64), kind tag (u8), count (u64), then for softmax the
/// max logit and exp sum, then the payload; floats are 32-bit unless the
/// tag's high bit marks 64-bit values. Little-endian throughout.
std::size_t partial_record_bytes(MergeKind kind, std::size_t width, WirePrecision precision);
void encode_partials(std::span<const PartialAggregate> partials, WirePrecision precision, Bytes& out);
std::vector<PartialAggregate> decode_partials(std::span<const std::uint8_t> bytes, std::size_t width);

/// Combines partials for one destination (in the given order) into the
/// aggregate vector. Moment partials must already hold central sums. A
/// total count of 0 yields the zero vector.
std::vector<double> merge_partials(std::span<const PartialAggregate> parts, const LayerSpec& layer,
                                   std::size_t width);

/// Σ m and count over the parts, for the first moments pass.
std::vector<double> merge_mean(std::span<const PartialAggregate> parts, std::size_t width);

}  // namespace gnnserve
