#include "gnnserve/dataset_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace gnnserve {

namespace {

std::vector<char> read_all(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& file, const std::vector<char>& bytes) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + file.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<std::uint8_t>(p[i])) << (8 * i);
  return v;
}

std::uint64_t meta_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("meta: missing key '" + key + "'");
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw FormatError("meta: bad value for '" + key + "'");
  }
}

std::vector<std::uint8_t> read_mask(const std::filesystem::path& file, std::size_t n) {
  auto bytes = read_all(file);
  if (bytes.size() != n) throw FormatError(file.filename().string() + ": expected " + std::to_string(n) + " bytes");
  return {bytes.begin(), bytes.end()};
}

}  // namespace

std::map<std::string, std::string> read_meta(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw FormatError("cannot open " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(file.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_meta(const std::filesystem::path& file, const std::map<std::string, std::string>& kv) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + file.string());
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

void write_u64_file(const std::filesystem::path& file, std::span<const std::uint64_t> values) {
  std::vector<char> bytes;
  bytes.reserve(values.size() * 8);
  for (auto v : values) put_le(bytes, v);
  write_all(file, bytes);
}

std::vector<std::uint64_t> read_u64_file(const std::filesystem::path& file) {
  const auto bytes = read_all(file);
  if (bytes.size() % 8 != 0) throw FormatError(file.filename().string() + ": size is not a multiple of 8");
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_le<std::uint64_t>(bytes.data() + 8 * i);
  return out;
}

void write_f32_file(const std::filesystem::path& file, std::span<const float> values) {
  std::vector<char> bytes;
  bytes.reserve(values.size() * 4);
  for (auto v : values) put_le(bytes, std::bit_cast<std::uint32_t>(v));
  write_all(file, bytes);
}

std::vector<float> read_f32_file(const std::filesystem::path& file) {
  const auto bytes = read_all(file);
  if (bytes.size() % 4 != 0) throw FormatError(file.filename().string() + ": size is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + 4 * i));
  return out;
}

void save_dataset(const std::filesystem::path& dir, const GraphDataset& dataset) {
  std::filesystem::create_directories(dir);
  write_u64_file(dir / "offsets.bin", dataset.in_csr.offsets);
  write_u64_file(dir / "neighbors.bin", dataset.in_csr.neighbors);
  write_f32_file(dir / "features.bin", dataset.features.data());
  write_all(dir / "train_mask.bin", {dataset.train_mask.begin(), dataset.train_mask.end()});
  write_all(dir / "test_mask.bin", {dataset.test_mask.begin(), dataset.test_mask.end()});
  for (std::size_t l = 1;; ++l) {
    const auto stale = dir / ("pe_l" + std::to_string(l) + ".bin");
    if (!std::filesystem::exists(stale)) break;
    std::filesystem::remove(stale);
  }
  write_meta(dir / "meta", {{"num_nodes", std::to_string(dataset.num_nodes())},
                            {"num_edges", std::to_string(dataset.num_edges())},
                            {"feature_dim", std::to_string(dataset.feature_dim())},
                            {"num_layers_pe", "0"},
                            {"hidden_dims", ""}});
}

GraphDataset load_dataset(const std::filesystem::path& dir) {
  const auto meta = read_meta(dir / "meta");
  const auto n = meta_u64(meta, "num_nodes");
  const auto m = meta_u64(meta, "num_edges");
  const auto f = meta_u64(meta, "feature_dim");
  Csr csr;
  csr.offsets = read_u64_file(dir / "offsets.bin");
  csr.neighbors = read_u64_file(dir / "neighbors.bin");
  if (csr.offsets.size() != n + 1) throw FormatError("offsets.bin: expected num_nodes + 1 entries");
  if (csr.neighbors.size() != m) throw FormatError("neighbors.bin: expected num_edges entries");
  validate_csr(csr);
  auto feats = read_f32_file(dir / "features.bin");
  if (feats.size() != n * f) throw FormatError("features.bin: expected num_nodes x feature_dim floats");
  return make_dataset(std::move(csr), DenseMatrix(n, f, std::move(feats)), read_mask(dir / "train_mask.bin", n),
                      read_mask(dir / "test_mask.bin", n));
}

void save_pe(const std::filesystem::path& dir, const PeStore& pe) {
  auto meta = read_meta(dir / "meta");
  const auto n = meta_u64(meta, "num_nodes");
  std::string dims;
  for (std::size_t l = 1; l <= pe.num_layers(); ++l) {
    const auto& layer = pe.layers[l - 1];
    require(layer.rows() == n, "save_pe: PE rows != num_nodes");
    write_f32_file(dir / ("pe_l" + std::to_string(l) + ".bin"), layer.data());
    dims += (l > 1 ? "," : "") + std::to_string(layer.cols());
  }
  meta["num_layers_pe"] = std::to_string(pe.num_layers());
  meta["hidden_dims"] = dims;
  write_meta(dir / "meta", meta);
}

PeStore load_pe(const std::filesystem::path& dir) {
  const auto meta = read_meta(dir / "meta");
  const auto n = meta_u64(meta, "num_nodes");
  const auto layers = meta_u64(meta, "num_layers_pe");
  std::vector<std::uint64_t> dims;
  if (layers > 0) {
    std::stringstream ss(meta.at("hidden_dims"));
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(std::stoull(tok));
  }
  if (dims.size() != layers) throw FormatError("meta: hidden_dims does not list num_layers_pe entries");
  PeStore pe;
  for (std::size_t l = 1; l <= layers; ++l) {
    auto data = read_f32_file(dir / ("pe_l" + std::to_string(l) + ".bin"));
    if (data.size() != n * dims[l - 1]) throw FormatError("pe_l" + std::to_string(l) + ".bin: unexpected size");
    pe.layers.emplace_back(n, dims[l - 1], std::move(data));
  }
  return pe;
}

}  // namespace gnnserve
