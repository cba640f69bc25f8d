#include "gnnserve/request.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gnnserve/partition.hpp"

namespace gnnserve {

std::vector<NodeId> ServingRequest::query_ids() const {
  std::vector<NodeId> ids(num_queries());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = query_id(i);
  return ids;
}

void ServingRequest::validate(const GraphDataset& dataset) const {
  require(num_nodes == dataset.num_nodes(), "request: num_nodes does not match the dataset");
  require(num_queries() == 0 || query_features.cols() == dataset.feature_dim(),
          "request: query feature width != dataset feature dim");
  const NodeId limit = num_nodes + num_queries();
  for (const auto& e : edges) {
    if (!(e.src < limit && e.dst < limit)) throw InvalidArgument("request: unknown node id in edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
    require(is_query(e.src) || is_query(e.dst), "request: edge touches no query node");
  }
  for (float x : query_features.data()) require(std::isfinite(x), "request: non-finite query feature");
}

std::optional<std::size_t> PartitionedRequest::query_row(NodeId q) const {
  auto it = std::lower_bound(queries.begin(), queries.end(), q);
  if (it == queries.end() || *it != q) return std::nullopt;
  return static_cast<std::size_t>(it - queries.begin());
}

std::uint32_t query_partition(const ServingRequest& request, NodeId q, std::uint32_t num_partitions) {
  return static_cast<std::uint32_t>((q - request.num_nodes) % num_partitions);
}

std::vector<PartitionedRequest> partition_request(const ServingRequest& request, const PartitionMap& map) {
  const auto P = map.num_partitions;
  require(P >= 1, "partition_request: no partitions");
  auto home = [&](NodeId v) {
    return request.is_query(v) ? query_partition(request, v, P) : map.owner_of(v);
  };

  std::vector<PartitionedRequest> parts(P);
  const auto dim = request.query_features.cols();
  for (std::uint32_t p = 0; p < P; ++p) {
    parts[p].partition = p;
    parts[p].num_nodes = request.num_nodes;
    parts[p].num_queries_total = request.num_queries();
  }
  for (std::size_t i = 0; i < request.num_queries(); ++i) {
    parts[query_partition(request, request.query_id(i), P)].queries.push_back(request.query_id(i));
  }
  for (auto& part : parts) {
    part.query_features = DenseMatrix(part.queries.size(), dim);
    for (std::size_t r = 0; r < part.queries.size(); ++r) {
      auto src = request.query_features.row(part.queries[r] - request.num_nodes);
      std::copy(src.begin(), src.end(), part.query_features.row(r).begin());
    }
  }
  for (const auto& e : request.edges) {
    parts[home(e.src)].edges.push_back(e);
    ++parts[home(e.dst)].request_in_degree[e.dst];
  }
  return parts;
}

namespace {

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key '" + key + "'");
  return std::stoull(it->second);
}

template <typename T>
void write_le(std::ofstream& os, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T read_le(std::ifstream& is) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw FormatError("truncated binary file");
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void save_request(const std::filesystem::path& dir, const ServingRequest& request, std::size_t k) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "request");
    os << "B=" << request.num_queries() << "\nF=" << request.query_features.cols() << "\nk=" << k
       << "\nnum_nodes=" << request.num_nodes << "\nnum_edges=" << request.edges.size() << "\n";
  }
  {
    std::ofstream os(dir / "query_features.bin", std::ios::binary | std::ios::trunc);
    for (float f : request.query_features.data()) write_le(os, std::bit_cast<std::uint32_t>(f));
  }
  {
    std::ofstream os(dir / "query_edges.bin", std::ios::binary | std::ios::trunc);
    for (const auto& e : request.edges) {
      write_le(os, e.src);
      write_le(os, e.dst);
    }
  }
}

ServingRequest load_request(const std::filesystem::path& dir, std::size_t* k) {
  const auto kv = read_kv(dir / "request");
  const auto B = kv_u64(kv, "B");
  const auto F = kv_u64(kv, "F");
  if (k) *k = kv_u64(kv, "k");
  ServingRequest req;
  req.num_nodes = kv_u64(kv, "num_nodes");
  req.query_features = DenseMatrix(B, F);
  {
    std::ifstream is(dir / "query_features.bin", std::ios::binary);
    if (!is) throw FormatError("cannot open query_features.bin");
    for (auto& f : req.query_features.data()) f = std::bit_cast<float>(read_le<std::uint32_t>(is));
  }
  {
    const auto bytes = std::filesystem::file_size(dir / "query_edges.bin");
    if (bytes % 16 != 0) throw FormatError("query_edges.bin: size is not a multiple of 16");
    std::ifstream is(dir / "query_edges.bin", std::ios::binary);
    req.edges.resize(bytes / 16);
    for (auto& e : req.edges) {
      e.src = read_le<std::uint64_t>(is);
      e.dst = read_le<std::uint64_t>(is);
    }
  }
  return req;
}

}  // namespace gnnserve
