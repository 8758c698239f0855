#include "slicescope/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t m = sorted.size();
  if (m == 1) return sorted[0];
  const double h = q * static_cast<double>(m - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, m - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double manifold_compactness(const KnnGraph& graph, const SliceMask& mask) {
  const std::size_t size = mask.size();
  if (size < 1) throw ConfigError("compactness: empty slice");
  return static_cast<double>(induced_pair_weight_sum(graph, mask)) / static_cast<double>(size);
}

double subsampled_compactness(const KnnGraph& graph, const SliceMask& mask,
                              std::size_t subset_size, std::size_t repeats, std::uint64_t seed) {
  const std::vector<std::size_t> members = mask.indices();
  if (members.size() < subset_size)
    throw ConfigError("compactness: slice size " + std::to_string(members.size()) +
                      " is smaller than subset size " + std::to_string(subset_size));
  if (repeats < 1) throw ConfigError("compactness: repeats must be >= 1");

  Rng rng = Rng::stream(seed, /*tag=*/2);
  std::size_t total_edges = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::vector<std::size_t> pick = rng.sample_without_replacement(members.size(), subset_size);
    SliceMask sub(mask.n());
    for (std::size_t p : pick) sub.member[members[p]] = 1;
    total_edges += induced_pair_weight_sum(graph, sub);
  }
  // one exact division: the mean of count/size over repeats
  return static_cast<double>(total_edges) / static_cast<double>(repeats * subset_size);
}

DispersionStats euclidean_dispersion(const EmbeddingSet& embeddings, const SliceMask& mask) {
  const std::vector<std::size_t> members = mask.indices();
  const std::size_t m = members.size();
  if (m < 2) throw ConfigError("dispersion: need a slice of size >= 2");
  const std::size_t d = embeddings.d;

  std::vector<double> centroid(d, 0.0);
  for (std::size_t i : members) {
    const auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) centroid[j] += row[j];
  }
  for (double& c : centroid) c /= static_cast<double>(m);

  std::vector<double> dist(m, 0.0);
  double mean_sq = 0.0;
  for (std::size_t idx = 0; idx < m; ++idx) {
    const auto row = embeddings.row(members[idx]);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - centroid[j];
      sq += diff * diff;
    }
    dist[idx] = std::sqrt(sq);
    mean_sq += sq;
  }
  mean_sq /= static_cast<double>(m);

  DispersionStats stats;
  stats.variance = mean_sq / static_cast<double>(d);

  double mean_dist = 0.0;
  for (double v : dist) mean_dist += v;
  mean_dist /= static_cast<double>(m);
  double mean_ad = 0.0;
  for (double v : dist) mean_ad += std::abs(v - mean_dist);
  stats.mean_abs_dev = mean_ad / static_cast<double>(m);

  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double median = quantile_sorted(sorted, 0.5);
  std::vector<double> abs_dev(m);
  for (std::size_t i = 0; i < m; ++i) abs_dev[i] = std::abs(dist[i] - median);
  std::sort(abs_dev.begin(), abs_dev.end());
  stats.median_abs_dev = quantile_sorted(abs_dev, 0.5);
  stats.iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  return stats;
}

double rescale_compactness(double value, std::size_t k, std::size_t reference_k) {
  if (k < 1) throw ConfigError("compactness rescale: k must be >= 1");
  return value * static_cast<double>(reference_k) / static_cast<double>(k);
}

CoherenceReport coherence_report(const EmbeddingSet& embeddings, const KnnGraph& graph,
                                 const SliceMask& mask) {
  CoherenceReport report;
  report.compactness = manifold_compactness(graph, mask);
  report.compactness_rescaled_k10 = rescale_compactness(report.compactness, graph.k, 10);
  if (mask.size() >= 2) report.dispersion = euclidean_dispersion(embeddings, mask);
  return report;
}

}  // namespace slicescope
