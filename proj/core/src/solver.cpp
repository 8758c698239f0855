#include "slicescope/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "slicescope/error.hpp"
#include "slicescope/parallel.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

constexpr double kFeasTol = 1e-9;

void validate_problem(const QpProblem& problem) {
  if (problem.losses.size() != problem.graph.n)
    throw ConfigError("solver: loss count does not match graph size");
  if (!(problem.lambda >= 0.0) || !std::isfinite(problem.lambda))
    throw ConfigError("solver: lambda must be finite and >= 0");
  for (double l : problem.losses)
    if (!std::isfinite(l) || l < 0.0) throw ConfigError("solver: losses must be finite and >= 0");
  if (problem.budget < 1.0)
    throw ConfigError("solver: budget " + std::to_string(problem.budget) + " is below 1");
  if (problem.budget > static_cast<double>(problem.graph.n) + kFeasTol)
    throw ConfigError("solver: budget exceeds n");
}

double quadratic_term(const KnnGraph& graph, const std::vector<double>& a,
                      const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < graph.n; ++i) {
    if (a[i] == 0.0) continue;
    double inner = 0.0;
    for (std::uint32_t j : graph.row(i)) inner += b[j];
    sum += a[i] * inner;
  }
  return sum;
}

double raw_objective(const QpProblem& problem, const std::vector<double>& w) {
  double value = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) value += problem.losses[i] * w[i];
  if (problem.lambda != 0.0) value += problem.lambda * quadratic_term(problem.graph, w, w);
  return value;
}

// Descending order, ties toward the smaller index.
std::vector<std::size_t> order_descending(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

// Raises weights toward the budget in descending gradient order. Every
// objective coefficient is nonnegative, so this never decreases the
// objective; it realizes the constructive argument that the budget
// constraint binds at an optimum.
void fill_to_budget(const QpProblem& problem, std::vector<double>& w) {
  double sum = 0.0;
  for (double v : w) sum += v;
  double remaining = problem.budget - sum;
  if (remaining <= 1e-12) return;
  SliceWeights current{w};
  const std::vector<double> gradient = objective_gradient(problem, current);
  for (std::size_t idx : order_descending(gradient)) {
    const double add = std::min(1.0 - w[idx], remaining);
    if (add <= 0.0) continue;
    w[idx] += add;
    remaining -= add;
    if (remaining <= 1e-12) break;
  }
}

std::vector<double> project_box_budget(std::vector<double> v, double budget) {
  double sum = 0.0;
  for (double& x : v) {
    x = std::clamp(x, 0.0, 1.0);
    sum += x;
  }
  if (sum <= budget) return v;
  // Shift by tau so that sum clip(v - tau, 0, 1) = budget; monotone in tau.
  double lo = 0.0, hi = 0.0;
  for (double x : v) hi = std::max(hi, x);
  for (int iter = 0; iter < 200; ++iter) {
    const double tau = 0.5 * (lo + hi);
    double s = 0.0;
    for (double x : v) s += std::clamp(x - tau, 0.0, 1.0);
    if (std::abs(s - budget) <= 1e-10) {
      lo = hi = tau;
      break;
    }
    if (s > budget)
      lo = tau;
    else
      hi = tau;
  }
  const double tau = 0.5 * (lo + hi);
  for (double& x : v) x = std::clamp(x - tau, 0.0, 1.0);
  return v;
}

struct RunOutcome {
  std::vector<double> w;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

RunOutcome run_frank_wolfe(const QpProblem& problem, std::vector<double> w,
                           const SolverConfig& config) {
  RunOutcome out;
  double objective = raw_objective(problem, w);
  const std::size_t n = w.size();
  bool converged = false;
  int iterations = 0;
  std::vector<double> direction(n);
  while (iterations < config.max_iters) {
    ++iterations;
    const std::vector<double> gradient = objective_gradient(problem, SliceWeights{w});
    const SliceWeights vertex = linear_maximization_oracle(gradient, problem.budget);
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      direction[i] = vertex.w[i] - w[i];
      slope += gradient[i] * direction[i];
    }
    if (slope <= 1e-14) {
      converged = true;
      break;
    }
    // The objective along w + gamma*d is quadratic with curvature
    // 2*lambda*d'Qd; maximize it in closed form on [0, 1].
    const double curvature = problem.lambda * quadratic_term(problem.graph, direction, direction);
    double gamma = 1.0;
    if (curvature < 0.0) gamma = std::clamp(-slope / (2.0 * curvature), 0.0, 1.0);
    if (gamma <= 0.0) {
      converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = std::clamp(w[i] + gamma * direction[i], 0.0, 1.0);
    const double next = raw_objective(problem, w);
    if (!std::isfinite(next)) throw std::runtime_error("solver: non-finite objective");
    const double improvement = (next - objective) / std::max(1.0, std::abs(objective));
    objective = next;
    if (improvement < config.tol) {
      converged = true;
      break;
    }
  }
  out.w = std::move(w);
  out.objective = objective;
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

RunOutcome run_projected_gradient(const QpProblem& problem, std::vector<double> w,
                                  const SolverConfig& config) {
  RunOutcome out;
  double objective = raw_objective(problem, w);
  const std::size_t n = w.size();
  bool converged = false;
  int iterations = 0;
  while (iterations < config.max_iters) {
    ++iterations;
    const std::vector<double> gradient = objective_gradient(problem, SliceWeights{w});
    double step = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      std::vector<double> trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + step * gradient[i];
      trial = project_box_budget(std::move(trial), problem.budget);
      const double next = raw_objective(problem, trial);
      if (!std::isfinite(next)) throw std::runtime_error("solver: non-finite objective");
      if (next > objective) {
        const double improvement = (next - objective) / std::max(1.0, std::abs(objective));
        w = std::move(trial);
        objective = next;
        accepted = true;
        if (improvement < config.tol) converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    if (converged) break;
  }
  out.w = std::move(w);
  out.objective = objective;
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

// Steepest-ascent exchange search on the binary slice: while some swap of a
// member for a non-member raises the objective, apply the best one.
// cnt[v] tracks the edge mass between v and the current members (both
// directions), kept incrementally via the reverse adjacency.
SliceMask swap_polish(const QpProblem& problem, SliceMask mask) {
  const KnnGraph& graph = problem.graph;
  const std::size_t n = graph.n;
  std::vector<std::vector<std::uint32_t>> reverse(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t j : graph.row(i)) reverse[j].push_back(static_cast<std::uint32_t>(i));

  std::vector<double> cnt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.contains(i)) continue;
    for (std::uint32_t t : graph.row(i)) cnt[t] += 1.0;
    for (std::uint32_t t : reverse[i]) cnt[t] += 1.0;
  }
  auto mutual_edges = [&](std::size_t a, std::size_t b) {
    double m = 0.0;
    for (std::uint32_t t : graph.row(a)) m += t == b;
    for (std::uint32_t t : graph.row(b)) m += t == a;
    return m;
  };

  std::vector<std::size_t> members = mask.indices();
  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < n; ++i)
    if (!mask.contains(i)) outside.push_back(i);

  for (int pass = 0; pass < 1000; ++pass) {
    double best_gain = 1e-12;
    std::size_t best_m = 0, best_o = 0;
    bool found = false;
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
      const std::size_t i = members[mi];
      const double drop = problem.losses[i] + problem.lambda * cnt[i];
      for (std::size_t oi = 0; oi < outside.size(); ++oi) {
        const std::size_t j = outside[oi];
        const double gain = problem.losses[j] +
                            problem.lambda * (cnt[j] - mutual_edges(i, j)) - drop;
        if (gain > best_gain) {
          best_gain = gain;
          best_m = mi;
          best_o = oi;
          found = true;
        }
      }
    }
    if (!found) break;
    const std::size_t removed = members[best_m];
    const std::size_t added = outside[best_o];
    mask.member[removed] = 0;
    mask.member[added] = 1;
    for (std::uint32_t t : graph.row(removed)) cnt[t] -= 1.0;
    for (std::uint32_t t : reverse[removed]) cnt[t] -= 1.0;
    for (std::uint32_t t : graph.row(added)) cnt[t] += 1.0;
    for (std::uint32_t t : reverse[added]) cnt[t] += 1.0;
    members[best_m] = added;
    outside[best_o] = removed;
  }
  return mask;
}

std::vector<double> loss_greedy_vertex(const QpProblem& problem) {
  const std::size_t n = problem.graph.n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return problem.losses[a] > problem.losses[b];
  });
  std::vector<double> w(n, 0.0);
  const std::size_t whole = static_cast<std::size_t>(std::floor(problem.budget));
  for (std::size_t r = 0; r < std::min(whole, n); ++r) w[order[r]] = 1.0;
  return w;
}

std::vector<double> random_feasible(const QpProblem& problem, Rng& rng) {
  const std::size_t n = problem.graph.n;
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& x : w) {
    x = rng.uniform();
    sum += x;
  }
  if (sum > problem.budget) {
    const double scale = problem.budget / sum;
    for (double& x : w) x *= scale;
  }
  return w;
}

}  // namespace

QpProblem make_problem(KnnGraph graph, LossVector losses, double lambda, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("solver: alpha must be in (0, 1]");
  QpProblem problem{std::move(graph), std::move(losses), lambda, alpha, 0.0};
  problem.budget = alpha * static_cast<double>(problem.graph.n);
  validate_problem(problem);
  return problem;
}

QpProblem make_problem_with_budget(KnnGraph graph, LossVector losses, double lambda,
                                   double budget) {
  QpProblem problem{std::move(graph), std::move(losses), lambda, 0.0, budget};
  problem.alpha = budget / static_cast<double>(problem.graph.n);
  validate_problem(problem);
  return problem;
}

double objective_value(const QpProblem& problem, const SliceWeights& w) {
  if (w.w.size() != problem.graph.n)
    throw ConfigError("solver: weight vector length does not match n");
  double sum = 0.0;
  for (double x : w.w) {
    if (x < -kFeasTol || x > 1.0 + kFeasTol)
      throw ConfigError("solver: weight outside [0, 1]");
    sum += x;
  }
  if (sum > problem.budget + kFeasTol) throw ConfigError("solver: weights exceed budget");
  return raw_objective(problem, w.w);
}

std::vector<double> objective_gradient(const QpProblem& problem, const SliceWeights& w) {
  std::vector<double> gradient = problem.losses;
  if (problem.lambda != 0.0) {
    for (std::size_t i = 0; i < problem.graph.n; ++i) {
      for (std::uint32_t j : problem.graph.row(i)) {
        gradient[i] += problem.lambda * w.w[j];
        gradient[j] += problem.lambda * w.w[i];
      }
    }
  }
  return gradient;
}

SliceWeights linear_maximization_oracle(const std::vector<double>& gradient, double budget) {
  const std::size_t n = gradient.size();
  SliceWeights result;
  result.w.assign(n, 0.0);
  const std::size_t whole = static_cast<std::size_t>(std::floor(budget));
  const double remainder = budget - static_cast<double>(whole);
  std::size_t placed = 0;
  for (std::size_t idx : order_descending(gradient)) {
    if (gradient[idx] <= 0.0) break;
    if (placed < whole) {
      result.w[idx] = 1.0;
      ++placed;
    } else {
      if (remainder > 0.0) result.w[idx] = remainder;
      break;
    }
  }
  return result;
}

SolverResult solve(const QpProblem& problem, const SolverConfig& config) {
  validate_problem(problem);
  if (config.restarts < 1) throw ConfigError("solver: restarts must be >= 1");

  std::vector<RunOutcome> outcomes(static_cast<std::size_t>(config.restarts));
  parallel_chunks(static_cast<std::size_t>(config.restarts), 1,
                  [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t r = lo; r < hi; ++r) {
                      std::vector<double> start;
                      if (r == 0) {
                        start = loss_greedy_vertex(problem);
                      } else {
                        Rng rng = Rng::stream(config.seed, 1000 + r);
                        start = random_feasible(problem, rng);
                      }
                      RunOutcome outcome =
                          config.method == SolverMethod::kFrankWolfe
                              ? run_frank_wolfe(problem, std::move(start), config)
                              : run_projected_gradient(problem, std::move(start), config);
                      // The budget constraint binds at any maximizer; raise
                      // leftover mass, then polish the rounded vertex with
                      // exchange moves, which continuous ascent can stop
                      // just short of.
                      fill_to_budget(problem, outcome.w);
                      SolverResult probe{SliceWeights{outcome.w}, 0.0, 0, false, 0};
                      const SliceMask rounded =
                          swap_polish(problem, extract_slice(probe, problem));
                      std::vector<double> rounded_w(problem.graph.n, 0.0);
                      for (std::size_t i = 0; i < problem.graph.n; ++i)
                        if (rounded.contains(i)) rounded_w[i] = 1.0;
                      fill_to_budget(problem, rounded_w);
                      if (raw_objective(problem, rounded_w) > raw_objective(problem, outcome.w))
                        outcome.w = std::move(rounded_w);
                      outcome.objective = raw_objective(problem, outcome.w);
                      outcomes[r] = std::move(outcome);
                    }
                  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r)
    if (outcomes[r].objective > outcomes[best].objective) best = r;

  SolverResult result;
  result.weights.w = std::move(outcomes[best].w);
  result.objective = outcomes[best].objective;
  result.iterations = outcomes[best].iterations;
  result.converged = outcomes[best].converged;
  result.restart_index = static_cast<int>(best);
  return result;
}

OracleResult brute_force_oracle(const QpProblem& problem) {
  const std::size_t n = problem.graph.n;
  if (n > 24) throw ConfigError("oracle: instance too large (n > 24)");
  const double rounded = std::round(problem.budget);
  if (std::abs(problem.budget - rounded) > 1e-9)
    throw ConfigError("oracle: budget must be an integer");
  const std::size_t m = static_cast<std::size_t>(rounded);
  if (m < 1 || m > n) throw ConfigError("oracle: budget out of range");

  std::vector<std::size_t> combo(m);
  std::iota(combo.begin(), combo.end(), std::size_t{0});

  OracleResult best;
  best.objective = -1.0;
  std::vector<double> w(n, 0.0);
  for (;;) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i : combo) w[i] = 1.0;
    const double value = raw_objective(problem, w);
    if (value > best.objective) {
      best.objective = value;
      best.mask = SliceMask::from_indices(n, combo);
    }
    // next combination in lexicographic order
    std::size_t pos = m;
    while (pos > 0 && combo[pos - 1] == n - m + pos - 1) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t i = pos; i < m; ++i) combo[i] = combo[i - 1] + 1;
  }
  return best;
}

SliceMask extract_slice(const SolverResult& result, const QpProblem& problem) {
  const std::size_t n = problem.graph.n;
  const std::size_t take = static_cast<std::size_t>(std::floor(problem.budget));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (result.weights.w[a] != result.weights.w[b]) return result.weights.w[a] > result.weights.w[b];
    if (problem.losses[a] != problem.losses[b]) return problem.losses[a] > problem.losses[b];
    return a < b;
  });
  order.resize(std::min(take, n));
  return SliceMask::from_indices(n, order);
}

std::string solver_result_to_json(const SolverResult& result,
                                  const std::vector<std::size_t>& slice_indices) {
  nlohmann::json doc;
  doc["objective"] = result.objective;
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  doc["restart_index"] = result.restart_index;
  doc["weights"] = result.weights.w;
  doc["slice_indices"] = slice_indices;
  return doc.dump(2);
}

double separability_objective(const QpProblem& problem, const SliceWeights& w, double lambda1,
                              double lambda2) {
  double value = 0.0;
  for (std::size_t i = 0; i < w.w.size(); ++i) value += problem.losses[i] * w.w[i];
  double internal = 0.0, boundary = 0.0;
  for (std::size_t i = 0; i < problem.graph.n; ++i) {
    for (std::uint32_t j : problem.graph.row(i)) {
      internal += w.w[i] * w.w[j];
      boundary += w.w[i] * (1.0 - w.w[j]);
    }
  }
  return value + lambda1 * internal - lambda2 * boundary;
}

std::vector<DiscoverRound> discover_slices_detailed(const DatasetBundle& bundle,
                                                    const GraphBuildConfig& graph_config,
                                                    double alpha, double lambda,
                                                    const SolverConfig& config, int count) {
  if (count < 1) throw ConfigError("discover: slice count must be >= 1");
  const std::size_t n = bundle.n();
  const double budget = alpha * static_cast<double>(n);
  const std::size_t take = static_cast<std::size_t>(std::floor(budget));
  if (take < 1) throw ConfigError("discover: alpha * n is below 1 sample");

  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  std::vector<DiscoverRound> rounds;
  for (int round = 0; round < count; ++round) {
    if (remaining.size() < std::max(take, graph_config.k + 1))
      throw ConfigError("discover: insufficient remaining samples at round " +
                        std::to_string(round));
    const DatasetBundle sub = subset_bundle(bundle, remaining);
    KnnGraph graph = build_knn_graph(sub.embeddings, graph_config);
    const QpProblem problem =
        make_problem_with_budget(std::move(graph), sub.losses, lambda, budget);
    SolverResult result = solve(problem, config);
    const SliceMask local = extract_slice(result, problem);

    DiscoverRound out;
    out.rows = remaining;
    out.mask = SliceMask(n);
    std::vector<std::size_t> next_remaining;
    next_remaining.reserve(remaining.size());
    for (std::size_t local_idx = 0; local_idx < remaining.size(); ++local_idx) {
      if (local.contains(local_idx))
        out.mask.member[remaining[local_idx]] = 1;
      else
        next_remaining.push_back(remaining[local_idx]);
    }
    out.result = std::move(result);
    rounds.push_back(std::move(out));
    remaining = std::move(next_remaining);
  }
  return rounds;
}

std::vector<SliceMask> discover_slices(const DatasetBundle& bundle,
                                       const GraphBuildConfig& graph_config, double alpha,
                                       double lambda, const SolverConfig& config, int count) {
  std::vector<SliceMask> slices;
  for (DiscoverRound& round :
       discover_slices_detailed(bundle, graph_config, alpha, lambda, config, count))
    slices.push_back(std::move(round.mask));
  return slices;
}

}  // namespace slicescope
