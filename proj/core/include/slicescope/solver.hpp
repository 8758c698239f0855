#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slicescope/dataset.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope {

// Instance of the slice-discovery program: maximize
//   sum_i w_i l_i + lambda * sum_{(i,j): q_ij = 1} w_i w_j
// over 0 <= w_i <= 1, sum_i w_i <= budget, with budget = alpha * n.
// The quadratic term runs over ordered pairs of the directed graph.
struct QpProblem {
  KnnGraph graph;
  LossVector losses;
  double lambda = 1.0;
  double alpha = 0.05;
  double budget = 0.0;
};

QpProblem make_problem(KnnGraph graph, LossVector losses, double lambda, double alpha);
// Same instance with an explicit budget (used when a fixed absolute slice
// size must survive dataset shrinkage).
QpProblem make_problem_with_budget(KnnGraph graph, LossVector losses, double lambda,
                                   double budget);

struct SliceWeights {
  std::vector<double> w;
};

enum class SolverMethod { kFrankWolfe, kProjectedGradient };

struct SolverConfig {
  SolverMethod method = SolverMethod::kFrankWolfe;
  int restarts = 8;
  int max_iters = 500;
  double tol = 1e-7;  // relative objective improvement
  std::uint64_t seed = 0;
};

struct SolverResult {
  SliceWeights weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  int restart_index = 0;
};

// Throws ConfigError when w violates the box or budget constraints beyond
// 1e-9.
double objective_value(const QpProblem& problem, const SliceWeights& w);

// gradient_i = l_i + lambda * sum_j (q_ij + q_ji) w_j
std::vector<double> objective_gradient(const QpProblem& problem, const SliceWeights& w);

// Maximizes gradient . w over {0 <= w <= 1, sum w <= budget}: descending
// gradient order (ties by index), ones on the top floor(budget) positive
// coordinates, the fractional remainder on the next positive one.
SliceWeights linear_maximization_oracle(const std::vector<double>& gradient, double budget);

// Best result over config.restarts monotone-ascent runs. Restart 0 starts
// from the top-loss vertex, the rest from random feasible points. Ties
// between restarts break toward the smaller restart index, so parallel and
// serial execution pick the same winner.
SolverResult solve(const QpProblem& problem, const SolverConfig& config);

struct OracleResult {
  SliceMask mask;
  double objective = 0.0;
};

// Exact maximum over binary w with exactly `budget` ones, by enumeration.
// Requires n <= 24 and an integer budget.
OracleResult brute_force_oracle(const QpProblem& problem);

// Top floor(budget) samples by weight; ties by larger loss, then smaller
// index.
SliceMask extract_slice(const SolverResult& result, const QpProblem& problem);

// l.w + lambda1 * sum w_i w_j q_ij - lambda2 * sum w_i (1 - w_j) q_ij.
// The equivalent form of the objective that prices boundary edges; exposed
// for the identity checks in the test suite.
double separability_objective(const QpProblem& problem, const SliceWeights& w, double lambda1,
                              double lambda2);

// Repeatedly solve, extract, remove the slice, rebuild the graph on the
// remaining rows, and re-solve, holding the absolute budget alpha * n of the
// original dataset fixed. Returns `count` pairwise-disjoint masks over the
// original indices.
std::vector<SliceMask> discover_slices(const DatasetBundle& bundle,
                                       const GraphBuildConfig& graph_config, double alpha,
                                       double lambda, const SolverConfig& config, int count);

// Per-round detail of discover_slices. `result` is over the rows the round
// was solved on; `rows` maps those local positions to original indices;
// `mask` is over the original indices.
struct DiscoverRound {
  SliceMask mask;
  SolverResult result;
  std::vector<std::size_t> rows;
};

std::vector<DiscoverRound> discover_slices_detailed(const DatasetBundle& bundle,
                                                    const GraphBuildConfig& graph_config,
                                                    double alpha, double lambda,
                                                    const SolverConfig& config, int count);

// {objective, iterations, converged, restart_index, weights, slice_indices}.
std::string solver_result_to_json(const SolverResult& result,
                                  const std::vector<std::size_t>& slice_indices);

}  // namespace slicescope
