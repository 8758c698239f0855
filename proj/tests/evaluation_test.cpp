#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "slicescope/error.hpp"
#include "slicescope/evaluation.hpp"
#include "slicescope/rng.hpp"
#include "test_util.hpp"

using namespace slicescope;
using namespace slicescope::testutil;

TEST_CASE("precision at k") {
  const std::vector<double> probs = {0.9, 0.8, 0.7, 0.6};
  const std::vector<std::uint8_t> truth = {1, 0, 1, 1};
  CHECK(precision_at_k(probs, truth, 2) == 0.5);
  CHECK(precision_at_k({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}, 2) == 1.0);
  CHECK(precision_at_k(probs, {1, 1, 1, 1}, 3) == 1.0);
  // precision at n is the positive rate
  CHECK(precision_at_k(probs, truth, 4) == 0.75);
  CHECK_THROWS_AS(precision_at_k(probs, truth, 5), InputError);
  CHECK_THROWS_AS(precision_at_k(probs, {0, 0, 0, 0}, 2), InputError);
}

TEST_CASE("average precision worked example") {
  const std::vector<double> probs = {0.9, 0.8, 0.7, 0.6};
  const std::vector<std::uint8_t> truth = {1, 0, 1, 1};
  const double expected = (1.0 / 1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0;
  CHECK(average_precision(probs, truth) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(average_precision(probs, truth) == doctest::Approx(0.80556).epsilon(1e-4));
  CHECK(average_precision({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(average_precision({0.9, 0.8, 0.7, 0.6}, {0, 0, 0, 1}) == 0.25);
  CHECK_THROWS_AS(average_precision(probs, {0, 0, 0, 0}), InputError);
}

TEST_CASE("average precision is invariant under monotone score transforms") {
  Rng rng(301);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(40);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> truth(n, 0);
    for (double& s : scores) s = rng.uniform(0.1, 2.0);
    std::size_t positives = 0;
    for (auto& t : truth) positives += (t = rng.bernoulli(0.4) ? 1 : 0);
    if (positives == 0) truth[0] = 1;
    std::vector<double> squared = scores;
    for (double& s : squared) s = s * s;  // strictly monotone on positives
    CHECK(average_precision(scores, truth) == average_precision(squared, truth));
  }
}

TEST_CASE("ranked metrics match the quadratic references") {
  Rng rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(30);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> truth(n, 0);
    for (double& s : scores) s = rng.uniform();
    std::size_t positives = 0;
    for (auto& t : truth) positives += (t = rng.bernoulli(0.3) ? 1 : 0);
    if (positives == 0) truth[rng.below(n)] = 1;
    const std::size_t k = 1 + rng.below(n);
    CHECK(precision_at_k(scores, truth, k) == reference_precision_at_k(scores, truth, k));
    CHECK(average_precision(scores, truth) == reference_average_precision(scores, truth));
  }
}

namespace {

DatasetBundle toy_bundle() {
  const ToyInstance toy = make_toy();
  DatasetBundle bundle;
  bundle.embeddings = toy.embeddings;
  bundle.losses = toy.losses;
  return bundle;
}

}  // namespace

TEST_CASE("evaluate_slice") {
  const ToyInstance toy = make_toy();
  DatasetBundle bundle = toy_bundle();
  EvalConfig config;

  SUBCASE("the full mask reproduces the dataset mean and a zero gap") {
    bundle.outcomes.correct = std::vector<std::uint8_t>{1, 0, 1, 0};
    SliceMask all(4);
    all.member = {1, 1, 1, 1};
    const SliceReport report = evaluate_slice(bundle, toy.graph, all, config);
    CHECK(report.mean_loss == doctest::Approx((1.0 + 0.9 + 0.8 + 0.7) / 4.0).epsilon(1e-12));
    CHECK(*report.performance_gap == doctest::Approx(0.0));
    CHECK(*report.epsilon_satisfied == false);
  }
  SUBCASE("an all-incorrect slice has zero accuracy") {
    bundle.outcomes.correct = std::vector<std::uint8_t>{0, 0, 1, 1};
    const SliceReport report =
        evaluate_slice(bundle, toy.graph, SliceMask::from_indices(4, {0, 1}), config);
    CHECK(*report.accuracy == 0.0);
    CHECK(*report.overall_accuracy == 0.5);
    CHECK(*report.epsilon_satisfied == true);
  }
  SUBCASE("toy slice mean loss and compactness") {
    const SliceReport report =
        evaluate_slice(bundle, toy.graph, SliceMask::from_indices(4, {0, 1}), config);
    CHECK(report.mean_loss == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(report.coherence.compactness == 1.0);
    CHECK(!report.accuracy.has_value());
    CHECK(report.precision_at.empty());
  }
  SUBCASE("precision metrics appear with truth labels and scores") {
    bundle.outcomes.slice_label = std::vector<std::uint8_t>{1, 1, 0, 0};
    EvalConfig small;
    small.precision_ks = {2};
    const SliceReport report = evaluate_slice(bundle, toy.graph,
                                              SliceMask::from_indices(4, {0, 1}), small,
                                              {0.9, 0.8, 0.2, 0.1});
    CHECK(report.precision_at.at(2) == 1.0);
    CHECK(*report.average_precision == 1.0);
  }
  SUBCASE("the mask itself ranks when no scores are given") {
    bundle.outcomes.slice_label = std::vector<std::uint8_t>{0, 1, 0, 0};
    EvalConfig small;
    small.precision_ks = {1};
    const SliceReport report =
        evaluate_slice(bundle, toy.graph, SliceMask::from_indices(4, {1}), small);
    CHECK(report.precision_at.at(1) == 1.0);
  }
  SUBCASE("length mismatches are rejected") {
    CHECK_THROWS_AS(evaluate_slice(bundle, toy.graph, SliceMask(3), config), InputError);
    CHECK_THROWS_AS(
        evaluate_slice(bundle, toy.graph, SliceMask::from_indices(4, {0}), config, {0.1, 0.2}),
        InputError);
  }
}

TEST_CASE("report json carries the schema keys") {
  const ToyInstance toy = make_toy();
  DatasetBundle bundle = toy_bundle();
  bundle.outcomes.correct = std::vector<std::uint8_t>{1, 0, 1, 0};
  bundle.outcomes.slice_label = std::vector<std::uint8_t>{1, 1, 0, 0};
  EvalConfig config;
  config.precision_ks = {2, 4};
  const SliceReport report =
      evaluate_slice(bundle, toy.graph, SliceMask::from_indices(4, {0, 1}), config);
  const std::string json = slice_report_to_json(report);
  for (const char* key :
       {"slice_size", "mean_loss", "accuracy", "overall_accuracy", "performance_gap",
        "epsilon_satisfied", "coherence", "compactness", "variance", "mean_abs_dev",
        "median_abs_dev", "iqr", "precision_at", "average_precision"})
    CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
}

TEST_CASE("project_2d") {
  SUBCASE("axis-aligned anisotropic data recovers the axes") {
    Rng rng(305);
    EmbeddingSet set;
    set.n = 300;
    set.d = 2;
    set.data.resize(600);
    for (std::size_t i = 0; i < 300; ++i) {
      set.data[i * 2] = 9.0 * rng.normal();
      set.data[i * 2 + 1] = rng.normal();
    }
    const Projection2D projection = project_2d(set);
    CHECK(!projection.pc2_degenerate);
    // pc1 should essentially reproduce the first (dominant) coordinate
    double dot = 0.0, nx = 0.0, np = 0.0;
    double mean_x = 0.0;
    for (std::size_t i = 0; i < 300; ++i) mean_x += set.data[i * 2];
    mean_x /= 300.0;
    for (std::size_t i = 0; i < 300; ++i) {
      const double x = set.data[i * 2] - mean_x;
      dot += x * projection.coords[i * 2];
      nx += x * x;
      np += projection.coords[i * 2] * projection.coords[i * 2];
    }
    CHECK(std::abs(dot) / std::sqrt(nx * np) > 0.999);
  }
  SUBCASE("pc1 variance dominates pc2 variance") {
    Rng rng(307);
    const EmbeddingSet set = random_embeddings(120, 6, rng);
    const Projection2D projection = project_2d(set);
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < set.n; ++i) {
      v1 += projection.coords[i * 2] * projection.coords[i * 2];
      v2 += projection.coords[i * 2 + 1] * projection.coords[i * 2 + 1];
    }
    CHECK(v1 >= v2);
  }
  SUBCASE("duplicated rows project identically") {
    Rng rng(309);
    EmbeddingSet set = random_embeddings(40, 4, rng);
    for (std::size_t j = 0; j < 4; ++j) set.data[5 * 4 + j] = set.data[11 * 4 + j];
    const Projection2D projection = project_2d(set);
    CHECK(projection.coords[5 * 2] == projection.coords[11 * 2]);
    CHECK(projection.coords[5 * 2 + 1] == projection.coords[11 * 2 + 1]);
  }
  SUBCASE("collinear data flags a degenerate second component") {
    EmbeddingSet set;
    set.n = 50;
    set.d = 3;
    set.data.resize(150);
    for (std::size_t i = 0; i < 50; ++i) {
      const double t = static_cast<double>(i);
      set.data[i * 3] = t;
      set.data[i * 3 + 1] = 2.0 * t;
      set.data[i * 3 + 2] = -t;
    }
    const Projection2D projection = project_2d(set);
    CHECK(projection.pc2_degenerate);
    for (std::size_t i = 0; i < 50; ++i) CHECK(projection.coords[i * 2 + 1] == 0.0);
  }
  SUBCASE("tiny inputs are rejected") {
    EmbeddingSet set;
    set.n = 1;
    set.d = 2;
    set.data = {1.0, 2.0};
    CHECK_THROWS_AS(project_2d(set), ConfigError);
  }
}
