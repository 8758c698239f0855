#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicescope/dataset.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope {

// Directed k-nearest-neighbor graph. Edge weight q_ij is 1 iff j appears in
// neighbors(i), else 0; q_ii = 0. Every node has out-degree exactly k.
struct KnnGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  // Flat n x k, row i holds the neighbors of i sorted by ascending distance,
  // ties by ascending index.
  std::vector<std::uint32_t> neighbors;

  std::span<const std::uint32_t> row(std::size_t i) const { return {neighbors.data() + i * k, k}; }

  bool has_edge(std::size_t i, std::size_t j) const {
    for (std::uint32_t v : row(i))
      if (v == j) return true;
    return false;
  }

  bool operator==(const KnnGraph&) const = default;
};

struct GraphBuildConfig {
  std::size_t k = 10;
  // Rows per parallel work unit; the result is independent of this value.
  std::size_t parallel_chunk = 256;
};

// Exact brute-force kNN under Euclidean distance. Deterministic: distance
// ties break toward the smaller sample index.
KnnGraph build_knn_graph(const EmbeddingSet& embeddings, const GraphBuildConfig& config);

std::size_t out_degree(const KnnGraph& graph, std::size_t node);

// Number of ordered pairs (i, j), i != j, with both endpoints in the mask and
// q_ij = 1.
std::size_t induced_pair_weight_sum(const KnnGraph& graph, const SliceMask& mask);

// Graph cache, format "KNG1": magic, u32 [version, n, k], u64 content hash of
// the embedding payload, then n*k little-endian u32 neighbor indices.
std::vector<std::uint8_t> encode_graph_cache(const KnnGraph& graph, std::uint64_t embedding_hash);
void save_graph_cache(const KnnGraph& graph, std::uint64_t embedding_hash,
                      const std::string& path);
// Returns nullopt when the stored hash does not match (stale cache); throws
// InputError on malformed files.
std::optional<KnnGraph> load_graph_cache(const std::string& path, std::uint64_t embedding_hash);

}  // namespace slicescope
