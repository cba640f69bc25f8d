#include "gnnserve/partial.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "gnnserve/dense.hpp"

namespace gnnserve {

MergeKind merge_kind(LayerKind kind) {
  switch (kind) {
    case LayerKind::kGcn: return MergeKind::kSum;
    case LayerKind::kSageMean: return MergeKind::kMean;
    case LayerKind::kSageMax: return MergeKind::kMax;
    case LayerKind::kPowerMean: return MergeKind::kPowerMean;
    case LayerKind::kMoments: return MergeKind::kMoments;
    case LayerKind::kGat: return MergeKind::kSoftmax;
  }
  throw InvalidArgument("merge_kind: unknown layer kind");
}

namespace {

constexpr std::uint8_t kWide = 0x80;

template <typename U>
void put(Bytes& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw TransportError("partial record truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

void put_real(Bytes& out, double v, WirePrecision p) {
  if (p == WirePrecision::kF64) {
    put(out, std::bit_cast<std::uint64_t>(v));
  } else {
    put(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

double get_real(std::span<const std::uint8_t> in, std::size_t& pos, bool wide) {
  if (wide) return std::bit_cast<double>(get<std::uint64_t>(in, pos));
  return std::bit_cast<float>(get<std::uint32_t>(in, pos));
}

}  // namespace

std::size_t partial_record_bytes(MergeKind kind, std::size_t width, WirePrecision precision) {
  const std::size_t real = precision == WirePrecision::kF64 ? 8 : 4;
  const std::size_t extra = kind == MergeKind::kSoftmax ? 2 : 0;
  return 8 + 1 + 8 + real * (extra + width);
}

void encode_partials(std::span<const PartialAggregate> partials, WirePrecision precision, Bytes& out) {
  for (const auto& p : partials) {
    put(out, p.dst);
    auto tag = static_cast<std::uint8_t>(p.kind);
    if (precision == WirePrecision::kF64) tag |= kWide;
    put(out, tag);
    put(out, p.count);
    if (p.kind == MergeKind::kSoftmax) {
      put_real(out, p.max_logit, precision);
      put_real(out, p.exp_sum, precision);
    }
    for (double x : p.payload) put_real(out, x, precision);
  }
}

std::vector<PartialAggregate> decode_partials(std::span<const std::uint8_t> bytes, std::size_t width) {
  std::vector<PartialAggregate> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    PartialAggregate p;
    p.dst = get<std::uint64_t>(bytes, pos);
    const auto tag = get<std::uint8_t>(bytes, pos);
    const bool wide = (tag & kWide) != 0;
    const auto kind = static_cast<std::uint8_t>(tag & ~kWide);
    if (kind > static_cast<std::uint8_t>(MergeKind::kSoftmax)) throw TransportError("partial record: bad kind tag");
    p.kind = static_cast<MergeKind>(kind);
    p.count = get<std::uint64_t>(bytes, pos);
    if (p.kind == MergeKind::kSoftmax) {
      p.max_logit = get_real(bytes, pos, wide);
      p.exp_sum = get_real(bytes, pos, wide);
    }
    p.payload.resize(width);
    for (auto& x : p.payload) x = get_real(bytes, pos, wide);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> merge_mean(std::span<const PartialAggregate> parts, std::size_t width) {
  std::vector<double> sum(width, 0.0);
  std::uint64_t count = 0;
  for (const auto& p : parts) {
    if (p.count == 0) continue;
    count += p.count;
    for (std::size_t j = 0; j < width; ++j) sum[j] += p.payload[j];
  }
  if (count > 0)
    for (auto& x : sum) x /= static_cast<double>(count);
  return sum;
}

std::vector<double> merge_partials(std::span<const PartialAggregate> parts, const LayerSpec& layer,
                                   std::size_t width) {
  std::vector<double> agg(width, 0.0);
  std::uint64_t count = 0;
  for (const auto& p : parts) {
    require(p.payload.size() == width, "merge: payload width mismatch");
    count += p.count;
  }
  if (count == 0) return agg;
  const double cnt = static_cast<double>(count);

  switch (layer.kind) {
    case LayerKind::kGcn:
    case LayerKind::kSageMean:
    case LayerKind::kPowerMean:
    case LayerKind::kMoments: {
      for (const auto& p : parts) {
        if (p.count == 0) continue;
        for (std::size_t j = 0; j < width; ++j) agg[j] += p.payload[j];
      }
      if (layer.kind == LayerKind::kGcn) {
        const double norm = 1.0 / std::sqrt(cnt + 1.0);
        for (auto& a : agg) a *= norm;
      } else if (layer.kind == LayerKind::kSageMean) {
        for (auto& a : agg) a /= cnt;
      } else if (layer.kind == LayerKind::kPowerMean) {
        require(layer.power != 0.0, "merge: power-mean exponent p == 0");
        for (auto& a : agg) a = std::pow(a / cnt, 1.0 / layer.power);
      } else {
        for (auto& a : agg) a = signed_root(a / cnt, layer.moment);
      }
      break;
    }
    case LayerKind::kSageMax: {
      std::fill(agg.begin(), agg.end(), -std::numeric_limits<double>::infinity());
      for (const auto& p : parts) {
        if (p.count == 0) continue;
        for (std::size_t j = 0; j < width; ++j) agg[j] = std::max(agg[j], p.payload[j]);
      }
      break;
    }
    case LayerKind::kGat: {
      std::vector<LogSumExp> lse;
      for (const auto& p : parts)
        if (p.count > 0) lse.push_back({p.max_logit, p.exp_sum});
      const auto merged = stable_logsumexp_merge(lse);
      for (const auto& p : parts) {
        if (p.count == 0) continue;
        const double f = rescale_factor(p.max_logit, merged.max_logit);
        for (std::size_t j = 0; j < width; ++j) agg[j] += f * p.payload[j];
      }
      for (auto& a : agg) a /= merged.exp_sum;
      break;
    }
  }
  return agg;
}

}  // namespace gnnserve
