#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "gnnserve/graph.hpp"
#include "gnnserve/pe_store.hpp"

namespace gnnserve {

/// Dataset directory:
///   meta                       key=value: num_nodes, num_edges, feature_dim,
///                              num_layers_pe, hidden_dims (comma list)
///   offsets.bin, neighbors.bin u64 LE
///   features.bin               f32 LE, row-major
///   train_mask.bin, test_mask.bin  one byte per node
///   pe_l{l}.bin                f32 LE, row-major, l = 1..num_layers_pe
void save_dataset(const std::filesystem::path& dir, const GraphDataset& dataset);
GraphDataset load_dataset(const std::filesystem::path& dir);

/// Writes pe_l*.bin and updates num_layers_pe / hidden_dims in meta.
void save_pe(const std::filesystem::path& dir, const PeStore& pe);
/// Empty store when the directory holds no PEs.
PeStore load_pe(const std::filesystem::path& dir);

std::map<std::string, std::string> read_meta(const std::filesystem::path& file);
void write_meta(const std::filesystem::path& file, const std::map<std::string, std::string>& kv);

// Little-endian raw arrays.
void write_u64_file(const std::filesystem::path& file, std::span<const std::uint64_t> values);
std::vector<std::uint64_t> read_u64_file(const std::filesystem::path& file);
void write_f32_file(const std::filesystem::path& file, std::span<const float> values);
std::vector<float> read_f32_file(const std::filesystem::path& file);

}  // namespace gnnserve
