#include "gnnserve/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "gnnserve/types.hpp"

namespace gnnserve {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kGcn: return "gcn";
    case LayerKind::kSageMean: return "sage";
    case LayerKind::kGat: return "gat";
    case LayerKind::kPowerMean: return "powermean";
    case LayerKind::kMoments: return "moments";
    case LayerKind::kSageMax: return "sagemax";
  }
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (auto k : {LayerKind::kGcn, LayerKind::kSageMean, LayerKind::kGat, LayerKind::kPowerMean,
                 LayerKind::kMoments, LayerKind::kSageMax}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown model kind '" + name + "'");
}

bool uses_self_weight(LayerKind kind) {
  return kind == LayerKind::kSageMean || kind == LayerKind::kSageMax || kind == LayerKind::kPowerMean ||
         kind == LayerKind::kMoments;
}

void ModelSpec::validate() const {
  require(!layers.empty(), "model: needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    require(l.in_dim > 0 && l.out_dim > 0, "model: layer dims must be positive");
    if (i > 0) require(layers[i - 1].out_dim == l.in_dim, "model: layer dims do not chain");
    if (l.kind == LayerKind::kPowerMean) require(l.power != 0.0, "model: power-mean exponent p must be non-zero");
    if (l.kind == LayerKind::kMoments) require(l.moment >= 2, "model: moment order must be >= 2");
  }
}

ModelSpec make_model(LayerKind kind, std::size_t num_layers, std::uint32_t in_dim, std::uint32_t hidden,
                     double power, int moment) {
  ModelSpec m;
  for (std::size_t i = 0; i < num_layers; ++i) {
    LayerSpec l;
    l.kind = kind;
    l.in_dim = i == 0 ? in_dim : hidden;
    l.out_dim = hidden;
    l.power = power;
    l.moment = moment;
    l.activation = i + 1 < num_layers;
    m.layers.push_back(l);
  }
  m.validate();
  return m;
}

namespace {

DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (auto& x : m.data()) x = static_cast<float>(dist(rng));
  return m;
}

std::vector<float> uniform_vector(std::size_t n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(dist(rng));
  return v;
}

}  // namespace

Weights init_weights(const ModelSpec& model, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 rng(seed);
  Weights w;
  for (const auto& l : model.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    LayerWeights lw;
    if (uses_self_weight(l.kind)) lw.self_weight = uniform_matrix(l.in_dim, l.out_dim, bound, rng);
    lw.weight = uniform_matrix(l.in_dim, l.out_dim, bound, rng);
    if (l.kind == LayerKind::kGat) {
      const double abound = 1.0 / std::sqrt(static_cast<double>(l.out_dim));
      lw.att_src = uniform_vector(l.out_dim, abound, rng);
      lw.att_dst = uniform_vector(l.out_dim, abound, rng);
    }
    lw.bias = uniform_vector(l.out_dim, bound, rng);
    w.layers.push_back(std::move(lw));
  }
  return w;
}

void check_weights(const ModelSpec& model, const Weights& weights) {
  model.validate();
  require(weights.layers.size() == model.num_layers(), "weights: layer count does not match model");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto& w = weights.layers[i];
    const auto tag = "weights: layer " + std::to_string(i + 1) + ": ";
    if (!(w.weight.rows() == l.in_dim && w.weight.cols() == l.out_dim)) throw InvalidArgument(tag + "W shape mismatch");
    if (uses_self_weight(l.kind)) {
      if (!(w.self_weight.rows() == l.in_dim && w.self_weight.cols() == l.out_dim)) throw InvalidArgument(tag + "W_self shape mismatch");
    }
    if (l.kind == LayerKind::kGat) {
      if (!(w.att_src.size() == l.out_dim && w.att_dst.size() == l.out_dim)) throw InvalidArgument(tag + "attention size mismatch");
    }
    if (!(w.bias.size() == l.out_dim)) throw InvalidArgument(tag + "bias size mismatch");
  }
}

// weights.bin layout (all little-endian):
//   u32 layer_count
//   per layer: u32 kind, u32 in_dim, u32 out_dim, u32 param, u32 activation
//     param = bit pattern of float p for POWER_MEAN, n for MOMENTS, else 0
//   then per layer, f32 row-major: [W_self] W [att_src att_dst] bias
namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  std::uint8_t b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("weights: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_floats(std::ofstream& os, std::span<const float> v) {
  for (float f : v) put_u32(os, std::bit_cast<std::uint32_t>(f));
}

void get_floats(std::ifstream& is, std::span<float> v) {
  for (auto& f : v) f = std::bit_cast<float>(get_u32(is));
}

}  // namespace

void save_weights(const std::filesystem::path& path, const ModelSpec& model, const Weights& weights) {
  check_weights(model, weights);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("weights: cannot open " + path.string() + " for writing");
  put_u32(os, static_cast<std::uint32_t>(model.num_layers()));
  for (const auto& l : model.layers) {
    put_u32(os, static_cast<std::uint32_t>(l.kind));
    put_u32(os, l.in_dim);
    put_u32(os, l.out_dim);
    std::uint32_t param = 0;
    if (l.kind == LayerKind::kPowerMean) param = std::bit_cast<std::uint32_t>(static_cast<float>(l.power));
    if (l.kind == LayerKind::kMoments) param = static_cast<std::uint32_t>(l.moment);
    put_u32(os, param);
    put_u32(os, l.activation ? 1u : 0u);
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto& w = weights.layers[i];
    if (uses_self_weight(l.kind)) put_floats(os, w.self_weight.data());
    put_floats(os, w.weight.data());
    if (l.kind == LayerKind::kGat) {
      put_floats(os, w.att_src);
      put_floats(os, w.att_dst);
    }
    put_floats(os, w.bias);
  }
}

std::pair<ModelSpec, Weights> load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("weights: cannot open " + path.string());
  ModelSpec model;
  const auto count = get_u32(is);
  if (count == 0 || count > 1024) throw FormatError("weights: implausible layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    const auto kind = get_u32(is);
    if (kind > static_cast<std::uint32_t>(LayerKind::kSageMax)) throw FormatError("weights: unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in_dim = get_u32(is);
    l.out_dim = get_u32(is);
    const auto param = get_u32(is);
    if (l.kind == LayerKind::kPowerMean) l.power = std::bit_cast<float>(param);
    if (l.kind == LayerKind::kMoments) l.moment = static_cast<int>(param);
    l.activation = get_u32(is) != 0;
    model.layers.push_back(l);
  }
  model.validate();
  Weights weights;
  for (const auto& l : model.layers) {
    LayerWeights w;
    if (uses_self_weight(l.kind)) {
      w.self_weight = DenseMatrix(l.in_dim, l.out_dim);
      get_floats(is, w.self_weight.data());
    }
    w.weight = DenseMatrix(l.in_dim, l.out_dim);
    get_floats(is, w.weight.data());
    if (l.kind == LayerKind::kGat) {
      w.att_src.resize(l.out_dim);
      w.att_dst.resize(l.out_dim);
      get_floats(is, w.att_src);
      get_floats(is, w.att_dst);
    }
    w.bias.resize(l.out_dim);
    get_floats(is, w.bias);
    weights.layers.push_back(std::move(w));
  }
  if (is.peek() != std::ifstream::traits_type::eof()) throw FormatError("weights: trailing bytes");
  return {std::move(model), std::move(weights)};
}

}  // namespace gnnserve
