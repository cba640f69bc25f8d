#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gnnserve/dense.hpp"

namespace gnnserve {

enum class LayerKind : std::uint32_t {
  kGcn = 0,
  kSageMean = 1,
  kGat = 2,
  kPowerMean = 3,
  kMoments = 4,
  kSageMax = 5,
};

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kSageMean;
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  double power = 1.0;    // POWER_MEAN exponent p, p != 0
  int moment = 2;        // MOMENTS order n >= 2
  bool activation = true;  // ReLU on the output; false for the last layer

  /// Width of the messages this layer aggregates.
  std::uint32_t message_dim() const { return kind == LayerKind::kGat ? out_dim : in_dim; }
};

struct ModelSpec {
  std::vector<LayerSpec> layers;

  std::size_t num_layers() const { return layers.size(); }
  const LayerSpec& layer(std::size_t l) const { return layers.at(l - 1); }  // 1-based
  void validate() const;
};

/// k layers of one kind: in_dim -> hidden -> ... -> hidden, ReLU between
/// layers and none after the last.
ModelSpec make_model(LayerKind kind, std::size_t num_layers, std::uint32_t in_dim, std::uint32_t hidden,
                     double power = 1.0, int moment = 2);

/// Parameters of one layer. Matrices are in_dim x out_dim (row-vector
/// convention: out = x * W). Unused members stay empty.
struct LayerWeights {
  DenseMatrix weight;       // GCN: W; SAGE: W_neigh; GAT: W; POWER/MOMENTS: W on the aggregate
  DenseMatrix self_weight;  // SAGE / POWER_MEAN / MOMENTS: W_self
  std::vector<float> att_src;  // GAT
  std::vector<float> att_dst;  // GAT
  std::vector<float> bias;

  bool operator==(const LayerWeights&) const = default;
};

struct Weights {
  std::vector<LayerWeights> layers;
  const LayerWeights& layer(std::size_t l) const { return layers.at(l - 1); }  // 1-based
  bool operator==(const Weights&) const = default;
};

bool uses_self_weight(LayerKind kind);

/// Uniform(-1/sqrt(in_dim), 1/sqrt(in_dim)) for matrices and bias; attention
/// vectors use 1/sqrt(out_dim).
Weights init_weights(const ModelSpec& model, std::uint64_t seed);

/// Throws InvalidArgument when shapes disagree with the model.
void check_weights(const ModelSpec& model, const Weights& weights);

void save_weights(const std::filesystem::path& path, const ModelSpec& model, const Weights& weights);
std::pair<ModelSpec, Weights> load_weights(const std::filesystem::path& path);

}  // namespace gnnserve
