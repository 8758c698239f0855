#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slicescope/coherence.hpp"
#include "slicescope/dataset.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope {

struct EvalConfig {
  std::vector<std::size_t> precision_ks = {10, 25};
  // Minimum accuracy gap (overall minus slice, as a fraction) for a slice to
  // count as underperforming; 0.10 is the customary value for AP-style
  // detection inputs.
  double epsilon = 0.15;
};

struct SliceReport {
  std::size_t slice_size = 0;
  double mean_loss = 0.0;
  std::optional<double> accuracy;
  std::optional<double> overall_accuracy;
  std::optional<double> performance_gap;  // overall - slice, as a fraction
  std::optional<bool> epsilon_satisfied;
  CoherenceReport coherence;
  std::map<std::size_t, double> precision_at;
  std::optional<double> average_precision;
};

// Fraction of the k highest-scored samples (ties toward the smaller index)
// that are true slice members.
double precision_at_k(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth,
                      std::size_t k);

// Retrieval average precision over the full ranking: the mean of
// precision@r over the ranks r holding a true member.
double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& truth);

// Scores rank samples for the precision metrics (a slicing function's
// probabilities); when empty, the mask itself is used as a 0/1 ranking.
SliceReport evaluate_slice(const DatasetBundle& bundle, const KnnGraph& graph,
                           const SliceMask& mask, const EvalConfig& config,
                           const std::vector<double>& scores = {});

struct Projection2D {
  std::vector<double> coords;  // n x 2 row-major
  // Set when the input is collinear and the second component is undefined;
  // the second column is then all zeros.
  bool pc2_degenerate = false;
};

// Projection onto the top-2 principal components of the centered data,
// computed by power iteration with deflation. Component signs are fixed so
// the largest-magnitude loading is positive.
Projection2D project_2d(const EmbeddingSet& embeddings);

std::string slice_report_to_json(const SliceReport& report);

}  // namespace slicescope
