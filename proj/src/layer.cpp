#include "gnnserve/layer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnnserve {

double int_pow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

void compute_message(const LayerSpec& layer, const LayerWeights& w, std::span<const float> h,
                     std::uint32_t src_degree, std::span<double> out) {
  switch (layer.kind) {
    case LayerKind::kGcn: {
      const double norm = 1.0 / std::sqrt(static_cast<double>(src_degree) + 1.0);
      for (std::size_t i = 0; i < h.size(); ++i) out[i] = static_cast<double>(h[i]) * norm;
      break;
    }
    case LayerKind::kSageMean:
    case LayerKind::kSageMax:
    case LayerKind::kMoments:
      for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i];
      break;
    case LayerKind::kPowerMean:
      for (std::size_t i = 0; i < h.size(); ++i) out[i] = softplus(h[i]);
      break;
    case LayerKind::kGat: {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double hi = h[i];
        auto row = w.weight.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += hi * static_cast<double>(row[j]);
      }
      break;
    }
  }
}

std::vector<double> compute_messages(const LayerSpec& layer, const LayerWeights& w,
                                     const ComputationBlock& block, const DenseMatrix& src_inputs) {
  require(src_inputs.rows() == block.num_src(), "layer: src_inputs rows != block source count");
  require(src_inputs.cols() == layer.in_dim, "layer: src_inputs width != layer in_dim");
  const std::size_t md = layer.message_dim();
  std::vector<double> msgs(block.num_src() * md);
  for (std::size_t s = 0; s < block.num_src(); ++s) {
    const std::uint32_t deg = block.src_degree.empty() ? 0 : block.src_degree[s];
    compute_message(layer, w, src_inputs.row(s), deg, {msgs.data() + s * md, md});
  }
  return msgs;
}

double attention_src_term(const LayerWeights& w, std::span<const double> z) {
  double acc = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) acc += static_cast<double>(w.att_src[j]) * z[j];
  return acc;
}

double attention_dst_term(const LayerWeights& w, std::span<const float> h_dst) {
  const auto out_dim = w.weight.cols();
  std::vector<double> z(out_dim, 0.0);
  for (std::size_t i = 0; i < h_dst.size(); ++i) {
    const double hi = h_dst[i];
    auto row = w.weight.row(i);
    for (std::size_t j = 0; j < out_dim; ++j) z[j] += hi * static_cast<double>(row[j]);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < out_dim; ++j) acc += static_cast<double>(w.att_dst[j]) * z[j];
  return acc;
}

void apply_update(const LayerSpec& layer, const LayerWeights& w, std::span<const float> self_input,
                  std::span<const double> agg, std::span<float> out) {
  const std::size_t od = layer.out_dim;
  std::vector<double> acc(od);
  for (std::size_t j = 0; j < od; ++j) acc[j] = w.bias[j];
  if (layer.kind == LayerKind::kGat) {
    for (std::size_t j = 0; j < od; ++j) acc[j] += agg[j];
  } else {
    if (uses_self_weight(layer.kind)) {
      for (std::size_t i = 0; i < self_input.size(); ++i) {
        const double x = self_input[i];
        auto row = w.self_weight.row(i);
        for (std::size_t j = 0; j < od; ++j) acc[j] += x * static_cast<double>(row[j]);
      }
    }
    for (std::size_t i = 0; i < agg.size(); ++i) {
      const double x = agg[i];
      auto row = w.weight.row(i);
      for (std::size_t j = 0; j < od; ++j) acc[j] += x * static_cast<double>(row[j]);
    }
  }
  for (std::size_t j = 0; j < od; ++j) {
    const float v = static_cast<float>(acc[j]);
    out[j] = layer.activation ? relu(v) : v;
  }
}

DenseMatrix layer_forward(const LayerSpec& layer, const LayerWeights& w, const ComputationBlock& block,
                          const DenseMatrix& src_inputs, const DenseMatrix& dst_prev) {
  require(dst_prev.rows() == block.num_dst(), "layer: dst_prev rows != block destination count");
  require(block.num_dst() == 0 || dst_prev.cols() == layer.in_dim, "layer: dst_prev width != layer in_dim");
  if (layer.kind == LayerKind::kPowerMean) require(layer.power != 0.0, "layer: power-mean exponent p == 0");

  const std::size_t md = layer.message_dim();
  const auto msgs = compute_messages(layer, w, block, src_inputs);
  auto msg = [&](std::size_t s) { return std::span<const double>(msgs.data() + s * md, md); };

  DenseMatrix out(block.num_dst(), layer.out_dim);
  std::vector<double> agg(md);
  std::vector<double> mean(md);
  std::vector<double> logits;

  for (std::size_t d = 0; d < block.num_dst(); ++d) {
    const auto edges = block.in_edges(d);
    const double cnt = static_cast<double>(edges.size());
    std::fill(agg.begin(), agg.end(), 0.0);
    if (!edges.empty()) {
      switch (layer.kind) {
        case LayerKind::kGcn: {
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) agg[j] += m[j];
          }
          const double norm = 1.0 / std::sqrt(cnt + 1.0);
          for (auto& a : agg) a *= norm;
          break;
        }
        case LayerKind::kSageMean: {
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) agg[j] += m[j];
          }
          for (auto& a : agg) a /= cnt;
          break;
        }
        case LayerKind::kSageMax: {
          std::fill(agg.begin(), agg.end(), -std::numeric_limits<double>::infinity());
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) agg[j] = std::max(agg[j], m[j]);
          }
          break;
        }
        case LayerKind::kPowerMean: {
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) agg[j] += std::pow(m[j], layer.power);
          }
          for (auto& a : agg) a = std::pow(a / cnt, 1.0 / layer.power);
          break;
        }
        case LayerKind::kMoments: {
          std::fill(mean.begin(), mean.end(), 0.0);
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) mean[j] += m[j];
          }
          for (auto& x : mean) x /= cnt;
          for (auto s : edges) {
            auto m = msg(s);
            for (std::size_t j = 0; j < md; ++j) agg[j] += int_pow(m[j] - mean[j], layer.moment);
          }
          for (auto& a : agg) a = signed_root(a / cnt, layer.moment);
          break;
        }
        case LayerKind::kGat: {
          const double dst_term = attention_dst_term(w, dst_prev.row(d));
          logits.clear();
          double top = -std::numeric_limits<double>::infinity();
          for (auto s : edges) {
            logits.push_back(attention_logit(attention_src_term(w, msg(s)), dst_term));
            top = std::max(top, logits.back());
          }
          double denom = 0.0;
          for (std::size_t e = 0; e < edges.size(); ++e) {
            const double a = std::exp(logits[e] - top);
            denom += a;
            auto m = msg(edges[e]);
            for (std::size_t j = 0; j < md; ++j) agg[j] += a * m[j];
          }
          for (auto& a : agg) a /= denom;
          break;
        }
      }
    }
    apply_update(layer, w, dst_prev.row(d), agg, out.row(d));
  }
  return out;
}

}  // namespace gnnserve
