#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"
#include "slicescope/solver.hpp"
#include "test_util.hpp"

using namespace slicescope;
using namespace slicescope::testutil;

namespace {

QpProblem toy_problem(double lambda, double budget) {
  const ToyInstance toy = make_toy();
  return make_problem_with_budget(toy.graph, toy.losses, lambda, budget);
}

SliceWeights indicator(std::size_t n, std::initializer_list<std::size_t> ones) {
  SliceWeights w;
  w.w.assign(n, 0.0);
  for (std::size_t i : ones) w.w[i] = 1.0;
  return w;
}

double weight_sum(const SliceWeights& w) {
  double sum = 0.0;
  for (double v : w.w) sum += v;
  return sum;
}

}  // namespace

TEST_CASE("objective value on the toy instance") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  CHECK(objective_value(problem, indicator(4, {0, 1})) == doctest::Approx(3.9).epsilon(1e-12));
  CHECK(objective_value(problem, indicator(4, {})) == 0.0);

  const QpProblem linear = toy_problem(0.0, 2.0);
  SliceWeights w;
  w.w = {0.25, 0.5, 0.75, 0.25};
  CHECK(objective_value(linear, w) ==
        doctest::Approx(0.25 * 1.0 + 0.5 * 0.9 + 0.75 * 0.8 + 0.25 * 0.7).epsilon(1e-12));
}

TEST_CASE("objective rejects infeasible weights") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  SliceWeights bad;
  bad.w = {1.5, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(objective_value(problem, bad), ConfigError);
  CHECK_THROWS_AS(objective_value(problem, indicator(4, {0, 1, 2})), ConfigError);
}

TEST_CASE("gradient on the toy instance") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  SUBCASE("at zero the gradient is the loss vector") {
    const auto gradient = objective_gradient(problem, indicator(4, {}));
    CHECK(gradient == problem.losses);
  }
  SUBCASE("at the {0,1} indicator") {
    const auto gradient = objective_gradient(problem, indicator(4, {0, 1}));
    CHECK(gradient[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(gradient[1] == doctest::Approx(2.9).epsilon(1e-12));
    CHECK(gradient[2] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(gradient[3] == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const QpProblem problem = random_small_problem(rng);
    const std::size_t n = problem.graph.n;
    SliceWeights w;
    w.w.resize(n);
    double sum = 0.0;
    for (double& v : w.w) {
      v = rng.uniform();
      sum += v;
    }
    if (sum > problem.budget)
      for (double& v : w.w) v *= problem.budget / sum;

    const auto gradient = objective_gradient(problem, w);
    const double h = 1e-5;
    for (std::size_t i = 0; i < n; ++i) {
      SliceWeights hi = w, lo = w;
      hi.w[i] += h;
      lo.w[i] -= h;
      // bypass feasibility checks: evaluate the raw polynomial
      auto raw = [&](const SliceWeights& x) {
        double value = 0.0;
        for (std::size_t a = 0; a < n; ++a) value += problem.losses[a] * x.w[a];
        for (std::size_t a = 0; a < n; ++a)
          for (std::uint32_t b : problem.graph.row(a)) value += problem.lambda * x.w[a] * x.w[b];
        return value;
      };
      const double fd = (raw(hi) - raw(lo)) / (2.0 * h);
      CHECK(std::abs(gradient[i] - fd) < 1e-6);
    }
  }
}

TEST_CASE("linear maximization oracle") {
  SUBCASE("integer budget") {
    const SliceWeights w = linear_maximization_oracle({3, 1, 2, -5}, 2.0);
    CHECK(w.w == std::vector<double>{1, 0, 1, 0});
  }
  SUBCASE("all-negative gradient keeps zero") {
    const SliceWeights w = linear_maximization_oracle({-1, -2, -3}, 2.0);
    CHECK(w.w == std::vector<double>{0, 0, 0});
  }
  SUBCASE("fractional remainder lands on the next positive coordinate") {
    const SliceWeights w = linear_maximization_oracle({3, 1, 2, -5}, 2.5);
    CHECK(w.w == std::vector<double>{1, 0.5, 1, 0});
  }
  SUBCASE("ties go to the smaller index") {
    const SliceWeights w = linear_maximization_oracle({1, 1, 1}, 1.0);
    CHECK(w.w == std::vector<double>{1, 0, 0});
  }
}

TEST_CASE("solve recovers the toy optimum") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  SolverConfig config;
  const SolverResult result = solve(problem, config);
  CHECK(result.objective == doctest::Approx(3.9).epsilon(1e-9));
  CHECK(extract_slice(result, problem) == SliceMask::from_indices(4, {0, 1}));
  CHECK(result.objective ==
        doctest::Approx(objective_value(problem, result.weights)).epsilon(1e-12));
}

TEST_CASE("lambda = 0 degenerates to the loss sort") {
  const QpProblem problem = toy_problem(0.0, 2.0);
  SolverConfig config;
  const SolverResult result = solve(problem, config);
  CHECK(result.weights.w == std::vector<double>{1, 1, 0, 0});
  CHECK(result.restart_index == 0);
}

TEST_CASE("solution saturates the budget when losses are positive") {
  Rng rng(103);
  for (int trial = 0; trial < 30; ++trial) {
    const QpProblem problem = random_small_problem(rng);
    SolverConfig config;
    config.seed = trial;
    const SolverResult result = solve(problem, config);
    CHECK(std::abs(weight_sum(result.weights) - problem.budget) < 1e-6);
    for (double v : result.weights.w) {
      CHECK(v >= -1e-9);
      CHECK(v <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("frank-wolfe matches the enumeration oracle on small instances") {
  Rng rng(107);
  for (int trial = 0; trial < 40; ++trial) {
    const QpProblem problem = random_small_problem(rng);
    const OracleResult oracle = brute_force_oracle(problem);
    SolverConfig config;
    config.seed = 500 + trial;
    const SolverResult result = solve(problem, config);
    CHECK(result.objective >= oracle.objective - 1e-6 * (1.0 + std::abs(oracle.objective)));
  }
}

TEST_CASE("projected gradient ascends monotonically from the greedy start") {
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const QpProblem problem = random_small_problem(rng);
    // value of restart 0's starting vertex: the top-floor(budget) losses
    std::vector<double> losses = problem.losses;
    std::sort(losses.begin(), losses.end(), std::greater<>());
    double greedy = 0.0;
    const std::size_t take = static_cast<std::size_t>(problem.budget);
    SliceWeights greedy_w;
    greedy_w.w.assign(problem.graph.n, 0.0);
    {
      std::vector<std::size_t> order(problem.graph.n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return problem.losses[a] > problem.losses[b];
      });
      for (std::size_t r = 0; r < take; ++r) greedy_w.w[order[r]] = 1.0;
      greedy = objective_value(problem, greedy_w);
    }
    SolverConfig config;
    config.method = SolverMethod::kProjectedGradient;
    config.seed = 700 + trial;
    const SolverResult result = solve(problem, config);
    CHECK(result.objective >= greedy - 1e-9);
    CHECK(std::abs(weight_sum(result.weights) - problem.budget) < 1e-6);
    for (double v : result.weights.w) {
      CHECK(v >= -1e-9);
      CHECK(v <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("brute force oracle on the toy instance") {
  SUBCASE("budget 2") {
    const OracleResult oracle = brute_force_oracle(toy_problem(1.0, 2.0));
    CHECK(oracle.mask == SliceMask::from_indices(4, {0, 1}));
    CHECK(oracle.objective == doctest::Approx(3.9).epsilon(1e-12));
  }
  SUBCASE("huge lambda prefers dense pairs, loss breaks the tie") {
    const OracleResult oracle = brute_force_oracle(toy_problem(1000.0, 2.0));
    CHECK(oracle.mask == SliceMask::from_indices(4, {0, 1}));
  }
  SUBCASE("budget n selects everything") {
    const OracleResult oracle = brute_force_oracle(toy_problem(1.0, 4.0));
    CHECK(oracle.mask == SliceMask::from_indices(4, {0, 1, 2, 3}));
  }
  SUBCASE("rejects non-integer budgets and big instances") {
    CHECK_THROWS_AS(brute_force_oracle(toy_problem(1.0, 2.5)), ConfigError);
    Rng rng(1);
    EmbeddingSet big = random_embeddings(30, 2, rng);
    GraphBuildConfig config;
    config.k = 2;
    KnnGraph graph = build_knn_graph(big, config);
    LossVector losses(30, 0.5);
    CHECK_THROWS_AS(brute_force_oracle(make_problem_with_budget(graph, losses, 1.0, 4.0)),
                    ConfigError);
  }
}

TEST_CASE("extract_slice tie rules") {
  const ToyInstance toy = make_toy();
  SUBCASE("plain weights") {
    const QpProblem problem = make_problem_with_budget(toy.graph, toy.losses, 1.0, 2.0);
    SolverResult result;
    result.weights.w = {1, 1, 0, 0};
    CHECK(extract_slice(result, problem) == SliceMask::from_indices(4, {0, 1}));
  }
  SUBCASE("weight ties break by larger loss") {
    const QpProblem problem =
        make_problem_with_budget(toy.graph, {0.1, 0.9, 0.5, 0.0}, 1.0, 2.0);
    SolverResult result;
    result.weights.w = {0.5, 0.5, 0.5, 0.0};
    CHECK(extract_slice(result, problem) == SliceMask::from_indices(4, {1, 2}));
  }
  SUBCASE("full ties break by smaller index") {
    const QpProblem problem =
        make_problem_with_budget(toy.graph, {0.3, 0.3, 0.3, 0.3}, 1.0, 2.0);
    SolverResult result;
    result.weights.w = {0.5, 0.5, 0.5, 0.5};
    CHECK(extract_slice(result, problem) == SliceMask::from_indices(4, {0, 1}));
  }
}

TEST_CASE("separability identity") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  const SliceWeights w = indicator(4, {0, 1});
  SUBCASE("toy value") {
    CHECK(separability_objective(problem, w, 0.5, 0.5) == doctest::Approx(2.9).epsilon(1e-12));
  }
  SUBCASE("lambda2 = 0 reduces to the plain objective") {
    CHECK(separability_objective(problem, w, 1.0, 0.0) ==
          doctest::Approx(objective_value(problem, w)).epsilon(1e-12));
  }
  SUBCASE("random binding weights satisfy the constant-offset identity") {
    Rng rng(109);
    for (int trial = 0; trial < 100; ++trial) {
      const QpProblem base = random_small_problem(rng);
      const std::size_t n = base.graph.n;
      // random weights rescaled to bind the budget exactly
      SliceWeights wt;
      wt.w.resize(n);
      for (double& v : wt.w) v = rng.uniform(0.1, 1.0);
      double sum = 0.0;
      for (double v : wt.w) sum += v;
      for (double& v : wt.w) v *= base.budget / sum;
      const double lambda1 = rng.uniform(0.0, 2.0);
      const double lambda2 = rng.uniform(0.0, 2.0);
      const QpProblem combined = make_problem_with_budget(
          base.graph, base.losses, lambda1 + lambda2, base.budget);
      const double lhs = separability_objective(combined, wt, lambda1, lambda2);
      const double rhs = objective_value(combined, wt) -
                         lambda2 * combined.budget * static_cast<double>(combined.graph.k);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
  }
}

TEST_CASE("solver determinism") {
  Rng rng(113);
  const QpProblem problem = random_small_problem(rng);
  SolverConfig config;
  config.seed = 99;
  const SolverResult a = solve(problem, config);
  const SolverResult b = solve(problem, config);
  CHECK(a.weights.w == b.weights.w);
  CHECK(a.objective == b.objective);
  CHECK(a.restart_index == b.restart_index);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("discover_slices") {
  const ToyInstance toy = make_toy();
  DatasetBundle bundle;
  bundle.embeddings = toy.embeddings;
  bundle.losses = toy.losses;
  GraphBuildConfig graph_config;
  graph_config.k = 1;
  SolverConfig config;

  SUBCASE("a single round equals solve + extract") {
    const auto slices = discover_slices(bundle, graph_config, 0.5, 1.0, config, 1);
    REQUIRE(slices.size() == 1);
    CHECK(slices[0] == SliceMask::from_indices(4, {0, 1}));
  }
  SUBCASE("the second round picks up the remaining pair") {
    const auto slices = discover_slices(bundle, graph_config, 0.5, 1.0, config, 2);
    REQUIRE(slices.size() == 2);
    CHECK(slices[0] == SliceMask::from_indices(4, {0, 1}));
    CHECK(slices[1] == SliceMask::from_indices(4, {2, 3}));
  }
  SUBCASE("masks are pairwise disjoint") {
    Rng rng(400);
    EmbeddingSet set = random_embeddings(60, 3, rng);
    LossVector losses(60);
    for (double& l : losses) l = rng.uniform();
    DatasetBundle big;
    big.embeddings = std::move(set);
    big.losses = std::move(losses);
    GraphBuildConfig gc;
    gc.k = 4;
    const auto slices = discover_slices(big, gc, 0.1, 1.0, config, 4);
    REQUIRE(slices.size() == 4);
    for (std::size_t a = 0; a < slices.size(); ++a) {
      CHECK(slices[a].size() == 6);
      for (std::size_t b = a + 1; b < slices.size(); ++b)
        for (std::size_t i = 0; i < 60; ++i)
          CHECK(!(slices[a].contains(i) && slices[b].contains(i)));
    }
  }
  SUBCASE("insufficient remaining samples") {
    CHECK_THROWS_AS(discover_slices(bundle, graph_config, 0.5, 1.0, config, 3), ConfigError);
  }
}

TEST_CASE("infeasible problems are rejected") {
  const ToyInstance toy = make_toy();
  CHECK_THROWS_AS(make_problem(toy.graph, toy.losses, 1.0, 0.1), ConfigError);  // budget < 1
  CHECK_THROWS_AS(make_problem(toy.graph, toy.losses, -1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(make_problem(toy.graph, {1.0, 2.0}, 1.0, 0.5), ConfigError);
}

TEST_CASE("solver json carries the result schema") {
  const QpProblem problem = toy_problem(1.0, 2.0);
  const SolverResult result = solve(problem, SolverConfig{});
  const std::string json = solver_result_to_json(result, {0, 1});
  CHECK(json.find("\"objective\"") != std::string::npos);
  CHECK(json.find("\"weights\"") != std::string::npos);
  CHECK(json.find("\"slice_indices\"") != std::string::npos);
  CHECK(json.find("\"restart_index\"") != std::string::npos);
}
