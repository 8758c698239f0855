#include "slicescope/knn_graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <utility>

#include "slicescope/error.hpp"
#include "slicescope/parallel.hpp"

namespace slicescope {

namespace {

constexpr char kCacheMagic[4] = {'K', 'N', 'G', '1'};
constexpr std::uint32_t kCacheVersion = 1;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

KnnGraph build_knn_graph(const EmbeddingSet& embeddings, const GraphBuildConfig& config) {
  const std::size_t n = embeddings.n;
  const std::size_t k = config.k;
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (k >= n)
    throw ConfigError("knn: k=" + std::to_string(k) + " must be < n=" + std::to_string(n));

  KnnGraph graph;
  graph.n = n;
  graph.k = k;
  graph.neighbors.assign(n * k, 0);

  parallel_chunks(n, config.parallel_chunk, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::pair<double, std::uint32_t>> candidates;
    candidates.reserve(n - 1);
    for (std::size_t i = lo; i < hi; ++i) {
      candidates.clear();
      const auto row = embeddings.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        candidates.emplace_back(squared_distance(row, embeddings.row(j)),
                                static_cast<std::uint32_t>(j));
      }
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                        candidates.end());
      for (std::size_t r = 0; r < k; ++r) graph.neighbors[i * k + r] = candidates[r].second;
    }
  });
  return graph;
}

std::size_t out_degree(const KnnGraph& graph, std::size_t node) {
  if (node >= graph.n)
    throw InputError("knn: node index " + std::to_string(node) + " out of range (n=" +
                     std::to_string(graph.n) + ")");
  return graph.k;
}

std::size_t induced_pair_weight_sum(const KnnGraph& graph, const SliceMask& mask) {
  if (mask.n() != graph.n) throw InputError("knn: mask length does not match graph");
  std::size_t count = 0;
  for (std::size_t i = 0; i < graph.n; ++i) {
    if (!mask.contains(i)) continue;
    for (std::uint32_t j : graph.row(i))
      if (mask.contains(j)) ++count;
  }
  return count;
}

std::vector<std::uint8_t> encode_graph_cache(const KnnGraph& graph, std::uint64_t embedding_hash) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCacheMagic, kCacheMagic + 4);
  auto put_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  };
  put_u32(kCacheVersion);
  put_u32(static_cast<std::uint32_t>(graph.n));
  put_u32(static_cast<std::uint32_t>(graph.k));
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((embedding_hash >> (8 * i)) & 0xFF));
  for (std::uint32_t v : graph.neighbors) put_u32(v);
  return out;
}

void save_graph_cache(const KnnGraph& graph, std::uint64_t embedding_hash,
                      const std::string& path) {
  const auto bytes = encode_graph_cache(graph, embedding_hash);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("graph cache: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("graph cache: write to '" + path + "' failed");
}

std::optional<KnnGraph> load_graph_cache(const std::string& path, std::uint64_t embedding_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("graph cache: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kCacheMagic, 4) != 0)
    throw InputError("graph cache: unrecognized format (bad magic)");
  std::size_t pos = 4;
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != kCacheVersion)
    throw InputError("graph cache: unsupported version " + std::to_string(version));
  const std::uint32_t n = get_u32();
  const std::uint32_t k = get_u32();
  std::uint64_t stored_hash = 0;
  for (int i = 0; i < 8; ++i) stored_hash |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
  pos += 8;
  if (stored_hash != embedding_hash) return std::nullopt;

  const std::size_t expected = pos + static_cast<std::size_t>(n) * k * 4;
  if (bytes.size() != expected)
    throw InputError("graph cache: payload size does not match header");
  KnnGraph graph;
  graph.n = n;
  graph.k = k;
  graph.neighbors.reserve(static_cast<std::size_t>(n) * k);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * k; ++i)
    graph.neighbors.push_back(get_u32());
  for (std::uint32_t v : graph.neighbors)
    if (v >= n) throw InputError("graph cache: neighbor index out of range");
  return graph;
}

}  // namespace slicescope
