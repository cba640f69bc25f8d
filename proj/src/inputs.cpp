#include "gnnserve/inputs.hpp"

#include <algorithm>

namespace gnnserve {

void InputProvider::count_feature(std::size_t width, bool hit) const {
  ++stats_.feature_rows;
  if (hit) {
    ++stats_.cache_hits;
  } else {
    stats_.bytes += width * sizeof(float);
  }
}

void InputProvider::count_pe(std::size_t width) const {
  ++stats_.pe_rows;
  stats_.bytes += width * sizeof(float);
}

CentralInputs::CentralInputs(const GraphDataset& dataset, const ServingRequest& request, const PeStore* pe,
                             const FeatureCache* cache)
    : dataset_(&dataset), request_(&request), pe_(pe), cache_(cache) {}

std::span<const float> CentralInputs::feature(NodeId v) const {
  if (request_->is_query(v)) {
    if (!(v - request_->num_nodes < request_->num_queries())) throw InvalidArgument("inputs: unknown query " + std::to_string(v));
    auto row = request_->query_features.row(v - request_->num_nodes);
    count_feature(row.size(), false);
    return row;
  }
  if (!(v < dataset_->num_nodes())) throw InvalidArgument("inputs: unknown node " + std::to_string(v));
  if (cache_) {
    if (auto hit = cache_->lookup(v)) {
      count_feature(hit->size(), true);
      return *hit;
    }
  }
  auto row = dataset_->features.row(v);
  count_feature(row.size(), false);
  return row;
}

std::span<const float> CentralInputs::pe(std::size_t layer, NodeId v) const {
  if (!(pe_ != nullptr && pe_->has_layer(layer))) throw InvalidArgument("inputs: PE layer " + std::to_string(layer) + " unavailable");
  if (!(v < pe_->layers[layer - 1].rows())) throw InvalidArgument("inputs: PE row out of range for node " + std::to_string(v));
  auto row = pe_->row(layer, v);
  count_pe(row.size());
  return row;
}

LocalInputs::LocalInputs(const LocalPartition& part, const PartitionedRequest& request, const FeatureCache* cache)
    : part_(&part), request_(&request), cache_(cache) {}

std::span<const float> LocalInputs::feature(NodeId v) const {
  if (v >= request_->num_nodes) {
    auto row = request_->query_row(v);
    if (!row.has_value()) throw InvalidArgument("inputs: query " + std::to_string(v) + " is not assigned to this partition");
    auto r = request_->query_features.row(*row);
    count_feature(r.size(), false);
    return r;
  }
  if (cache_) {
    if (auto hit = cache_->lookup(v)) {
      count_feature(hit->size(), true);
      return *hit;
    }
  }
  auto row = part_->row_of(v);
  if (!row.has_value()) throw InvalidArgument("inputs: node " + std::to_string(v) + " is not owned by this partition");
  auto r = part_->features.row(*row);
  count_feature(r.size(), false);
  return r;
}

std::span<const float> LocalInputs::pe(std::size_t layer, NodeId v) const {
  auto row = part_->row_of(v);
  if (!row.has_value()) throw InvalidArgument("inputs: PE for non-owned node " + std::to_string(v));
  if (!part_->pe.has_layer(layer)) throw InvalidArgument("inputs: PE layer " + std::to_string(layer) + " unavailable");
  auto r = part_->pe.row(layer, *row);
  count_pe(r.size());
  return r;
}

DenseMatrix gather_inputs(std::span<const NodeId> ids, std::span<const InputBinding> bindings,
                          std::size_t width, const InputProvider& inputs, const DenseMatrix* prev) {
  require(ids.size() == bindings.size(), "gather_inputs: binding count mismatch");
  DenseMatrix out(ids.size(), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::span<const float> row;
    switch (bindings[i].kind) {
      case BindingKind::kFeature: row = inputs.feature(ids[i]); break;
      case BindingKind::kPe: row = inputs.pe(bindings[i].pe_layer, ids[i]); break;
      case BindingKind::kComputed:
        if (!(prev != nullptr && bindings[i].prev_row < prev->rows())) throw InvalidArgument("gather_inputs: unbound computed input for node " + std::to_string(ids[i]));
        row = prev->row(bindings[i].prev_row);
        break;
    }
    if (!(row.size() == width)) throw InvalidArgument("gather_inputs: input width mismatch for node " + std::to_string(ids[i]));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace gnnserve
