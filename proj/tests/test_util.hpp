#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "slicescope/dataset.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/rng.hpp"
#include "slicescope/slice_mask.hpp"
#include "slicescope/solver.hpp"

namespace slicescope::testutil {

// The 4-point line instance: 1-D embeddings {0, 0.1, 1.0, 1.1}, k=1 graph
// with mutual edges 0<->1 and 2<->3, losses {1.0, 0.9, 0.8, 0.7}.
struct ToyInstance {
  EmbeddingSet embeddings;
  KnnGraph graph;
  LossVector losses;
};

inline ToyInstance make_toy() {
  ToyInstance toy;
  toy.embeddings.n = 4;
  toy.embeddings.d = 1;
  toy.embeddings.data = {0.0, 0.1, 1.0, 1.1};
  GraphBuildConfig config;
  config.k = 1;
  toy.graph = build_knn_graph(toy.embeddings, config);
  toy.losses = {1.0, 0.9, 0.8, 0.7};
  return toy;
}

inline EmbeddingSet random_embeddings(std::size_t n, std::size_t d, Rng& rng) {
  EmbeddingSet set;
  set.n = n;
  set.d = d;
  set.data.resize(n * d);
  for (double& v : set.data) v = rng.uniform();
  return set;
}

// Full-sort O(n^2 log n) reference for the kNN builder.
inline KnnGraph reference_knn(const EmbeddingSet& embeddings, std::size_t k) {
  const std::size_t n = embeddings.n;
  KnnGraph graph;
  graph.n = n;
  graph.k = k;
  graph.neighbors.resize(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t c = 0; c < embeddings.d; ++c) {
        const double diff = embeddings.at(i, c) - embeddings.at(j, c);
        sq += diff * diff;
      }
      all.emplace_back(sq, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) graph.neighbors[i * k + r] = all[r].second;
  }
  return graph;
}

// Adjacency-matrix pair count over all ordered pairs; independent of the
// neighbor-list walk in the production path.
inline std::size_t reference_pair_sum(const KnnGraph& graph, const SliceMask& mask) {
  const std::size_t n = graph.n;
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t j : graph.row(i)) adj[i * n + j] = 1;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && mask.contains(i) && mask.contains(j) && adj[i * n + j]) ++count;
  return count;
}

inline std::vector<std::size_t> reference_rank(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

inline double reference_precision_at_k(const std::vector<double>& scores,
                                       const std::vector<std::uint8_t>& truth, std::size_t k) {
  const auto order = reference_rank(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += truth[order[r]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Quadratic-time: rescans the prefix for every positive rank.
inline double reference_average_precision(const std::vector<double>& scores,
                                          const std::vector<std::uint8_t>& truth) {
  const auto order = reference_rank(scores);
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (std::uint8_t t : truth) positives += t != 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (truth[order[r]] == 0) continue;
    std::size_t hits = 0;
    for (std::size_t p = 0; p <= r; ++p) hits += truth[order[p]] != 0;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(positives);
}

// Random instance for the solver suites: n in [8, 18], k in {1,2,3},
// integer budget in [2, n/2], lambda from {0, 0.5, 1, 2}.
inline QpProblem random_small_problem(Rng& rng) {
  const std::size_t n = 8 + rng.below(11);
  const std::size_t k = 1 + rng.below(3);
  EmbeddingSet embeddings = random_embeddings(n, 4, rng);
  GraphBuildConfig config;
  config.k = k;
  KnnGraph graph = build_knn_graph(embeddings, config);
  LossVector losses(n);
  for (double& l : losses) l = rng.uniform();
  const double lambdas[] = {0.0, 0.5, 1.0, 2.0};
  const double lambda = lambdas[rng.below(4)];
  const std::size_t budget = 2 + rng.below(n / 2 - 1);
  return make_problem_with_budget(std::move(graph), std::move(losses), lambda,
                                  static_cast<double>(budget));
}

// Searches for a sample ordering in which consecutive samples share no edge
// in either direction (the integrality precondition). Returns true with a
// verified witness; false only means none was found within the attempt
// budget.
inline bool has_nonadjacent_ordering(const KnnGraph& graph, std::uint64_t seed = 7) {
  const std::size_t n = graph.n;
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t j : graph.row(i)) {
      adj[i * n + j] = 1;
      adj[j * n + i] = 1;
    }
  auto ok_after = [&](std::size_t prev, std::size_t next) { return adj[prev * n + next] == 0; };

  Rng rng(seed);
  std::vector<std::size_t> base(n);
  std::iota(base.begin(), base.end(), std::size_t{0});
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::size_t> pool = base;
    if (attempt > 0) rng.shuffle(pool);
    std::vector<std::size_t> path;
    std::vector<std::uint8_t> used(n, 0);
    path.push_back(pool[0]);
    used[pool[0]] = 1;
    bool stuck = false;
    while (path.size() < n) {
      bool advanced = false;
      for (std::size_t cand : pool) {
        if (used[cand]) continue;
        if (ok_after(path.back(), cand)) {
          path.push_back(cand);
          used[cand] = 1;
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        stuck = true;
        break;
      }
    }
    if (!stuck) {
      for (std::size_t i = 1; i < path.size(); ++i)
        if (!ok_after(path[i - 1], path[i])) return false;  // witness must verify
      return true;
    }
  }
  return false;
}

}  // namespace slicescope::testutil
