#pragma once

#include <cstdint>

#include "slicescope/dataset.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope {

// Distance-to-centroid dispersion statistics of a slice. `variance` is the
// mean squared distance to the centroid divided by d (per-dimension average);
// the other three summarize the scalar distance distribution.
struct DispersionStats {
  double variance = 0.0;
  double mean_abs_dev = 0.0;
  double median_abs_dev = 0.0;
  double iqr = 0.0;

  bool operator==(const DispersionStats&) const = default;
};

struct CoherenceReport {
  double compactness = 0.0;
  double compactness_rescaled_k10 = 0.0;
  DispersionStats dispersion;
};

// Average weighted degree of the induced subgraph on the slice: the ordered
// in-slice edge count divided by |slice|. Always in [0, k].
double manifold_compactness(const KnnGraph& graph, const SliceMask& mask);

// Mean compactness over `repeats` uniform subsets of the slice of size
// `subset_size`. Makes slices of different sizes comparable.
double subsampled_compactness(const KnnGraph& graph, const SliceMask& mask,
                              std::size_t subset_size, std::size_t repeats, std::uint64_t seed);

inline constexpr std::size_t kDefaultSubsetSize = 150;
inline constexpr std::size_t kDefaultSubsetRepeats = 20;

// Requires mask.size >= 2. Quantiles use linear interpolation.
DispersionStats euclidean_dispersion(const EmbeddingSet& embeddings, const SliceMask& mask);

// Linear rescaling of a compactness value measured at k onto a reference k.
double rescale_compactness(double value, std::size_t k, std::size_t reference_k = 10);

CoherenceReport coherence_report(const EmbeddingSet& embeddings, const KnnGraph& graph,
                                 const SliceMask& mask);

}  // namespace slicescope
