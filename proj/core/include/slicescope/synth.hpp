#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slicescope/classifier.hpp"
#include "slicescope/dataset.hpp"
#include "slicescope/evaluation.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/slice_mask.hpp"
#include "slicescope/solver.hpp"

namespace slicescope {

// Validation-size rule for the slice-size proportion.
inline double default_alpha(std::size_t n) { return n < 5000 ? 0.05 : 0.01; }

inline const std::vector<double> kDefaultLambdaGrid = {0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0};

enum class SettingKind { kCorrelation, kRare, kNoisy };

std::string to_string(SettingKind kind);
SettingKind setting_kind_from_string(const std::string& name);

struct LossProfile {
  double correct_mean = 0.1;
  double correct_std = 0.05;
  double incorrect_mean = 1.0;
  double incorrect_std = 0.2;
};

struct SettingParams {
  std::size_t n_validation = 2000;
  std::size_t n_test = 2000;
  std::size_t dim = 16;
  std::size_t clusters = 5;
  double separation = 8.0;
  double cluster_std = 1.0;
  double p_good = 0.95;  // correctness probability off the planted slice
  double p_bad = 0.30;   // correctness probability on the planted cluster
  double rare_prior = 0.03;
  double noisy_fraction = 0.25;
  LossProfile loss;
};

// Gaussian-mixture dataset with one planted error slice. correlation: one
// cluster has degraded correctness; rare: that cluster additionally has a
// small prior; noisy: a random fraction of one cluster gets flipped
// correctness and high-profile losses, and those samples form the slice.
struct SyntheticSetting {
  SettingKind kind = SettingKind::kCorrelation;
  DatasetBundle validation;
  DatasetBundle test;
  SliceMask planted_mask_val;
  SliceMask planted_mask_test;
  std::vector<std::uint32_t> cluster_val;
  std::vector<std::uint32_t> cluster_test;
  SettingParams params;
  std::uint64_t seed = 0;
};

// Deterministic per (kind, params, seed). Retries with the next seed (at
// most 5 attempts) until the planted slice's mean loss exceeds the
// population mean on both splits.
SyntheticSetting generate_setting(SettingKind kind, const SettingParams& params,
                                  std::uint64_t seed);

// Fraction of the planted samples' outgoing edges that stay inside their own
// cluster; the generator's separation sanity gauge.
double neighbor_purity(const KnnGraph& graph, const std::vector<std::uint32_t>& cluster,
                       std::uint32_t target_cluster);

struct NestedParams {
  std::size_t n = 2000;
  std::size_t dim = 16;
  double coarse_separation = 30.0;  // between y groups, along dim 0
  double fine_separation = 6.0;     // between a cells inside a y group, along dim 1
  double base_std = 1.0;
  // The a=1 cells are widened on `aniso_dims` extra dimensions; this is what
  // makes Euclidean variance non-monotone across the lattice while the graph
  // metric stays monotone.
  double aniso_std = 2.0;
  std::size_t aniso_dims = 8;
  double p_good = 0.95;
  double p_bad = 0.30;  // cell (y=1, a=1) is the genuine error slice
  LossProfile loss;
};

// Two-level mixture: coarse groups y in {0,1}, each split into cells a in
// {0,1}. The slice lattice is whole -> marginals (y=., a=.) -> cells (y, a).
struct NestedSetting {
  DatasetBundle data;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> a;
  NestedParams params;
  std::uint64_t seed = 0;
};

NestedSetting generate_nested_setting(const NestedParams& params, std::uint64_t seed);

// Mask for a lattice slice; pass -1 to leave a label unconstrained
// (whole = (-1, -1), marginals fix one label, cells fix both).
SliceMask nested_mask(const NestedSetting& setting, int y, int a);

// Coarse-to-fine lattice edges as ((coarse y, coarse a), (fine y, fine a)).
std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> nested_lattice_edges();

// Mixture with several planted error clusters of distinct loss levels plus a
// benign background; drives the repeated-removal workflow.
struct MultiSliceParams {
  std::size_t n = 2000;
  std::size_t dim = 16;
  double separation = 8.0;
  double cluster_std = 1.0;
  std::vector<double> planted_fractions = {0.10, 0.10, 0.10};
  std::vector<double> planted_incorrect_means = {1.6, 1.2, 0.8};
  double p_good = 0.95;
  double p_bad = 0.25;
  LossProfile loss;
};

struct MultiSliceSetting {
  DatasetBundle data;
  std::vector<SliceMask> planted;  // one per planted cluster, in params order
  std::vector<std::uint32_t> cluster;  // 0 = background, 1.. = planted
  MultiSliceParams params;
  std::uint64_t seed = 0;
};

MultiSliceSetting generate_multi_slice_setting(const MultiSliceParams& params,
                                               std::uint64_t seed);

struct TuneEntry {
  double lambda = 0.0;
  double slice_performance = 0.0;  // accuracy on the held-out selected slice
  double gap = 0.0;                // held-out overall accuracy minus slice accuracy
  double compactness = 0.0;
  bool qualifies = false;
};

struct TuneResult {
  std::vector<double> lambda_grid;
  std::vector<TuneEntry> per_lambda;
  double chosen_lambda = 0.0;
  double threshold = 0.0;
  // False when no grid value met the gap threshold and the largest-gap
  // lambda was returned instead.
  bool threshold_met = false;
};

struct TuneConfig {
  std::vector<double> grid = kDefaultLambdaGrid;
  double alpha = 0.0;  // 0 -> default_alpha of the half size
  double epsilon = 0.15;
  GraphBuildConfig graph;
  SolverConfig solver;
  TrainConfig trainer;
  std::uint64_t seed = 0;
};

// Split the validation data in two seeded halves, discover on one half per
// grid value, score the slicing function on the other, and pick the lambda
// maximizing compactness among those whose accuracy gap meets epsilon.
TuneResult tune_lambda(const DatasetBundle& validation, const TuneConfig& config);

struct BenchmarkConfig {
  double alpha = 0.0;  // 0 -> default_alpha of the validation size
  double lambda = 1.0;
  GraphBuildConfig graph;
  SolverConfig solver;
  TrainConfig trainer;
  EvalConfig eval;
};

struct BenchmarkRow {
  std::string method;  // "mcsd" or "top_loss"
  SettingKind kind = SettingKind::kCorrelation;
  std::size_t setting_index = 0;
  SliceReport report;
};

struct BenchmarkAggregate {
  std::string method;
  SettingKind kind = SettingKind::kCorrelation;
  std::size_t settings = 0;
  double precision_at_10 = 0.0;
  double precision_at_25 = 0.0;
  double average_precision = 0.0;
  double compactness = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkAggregate> aggregates;
};

// Full protocol per setting and method (the configured lambda plus the
// lambda = 0 top-loss baseline): discover on validation, fit the slicing
// function, select the top alpha share of the test split, score against the
// planted truth.
BenchmarkResult run_benchmark(const std::vector<SyntheticSetting>& settings,
                              const BenchmarkConfig& config);

}  // namespace slicescope
