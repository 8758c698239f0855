#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "slicescope/classifier.hpp"
#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"
#include "test_util.hpp"

using namespace slicescope;
using namespace slicescope::testutil;

namespace {

struct Blobs {
  EmbeddingSet embeddings;
  SliceMask mask;  // second blob marked positive
};

Blobs separable_blobs(std::size_t per_blob, std::uint64_t seed) {
  Rng rng(seed);
  Blobs blobs;
  blobs.embeddings.n = 2 * per_blob;
  blobs.embeddings.d = 2;
  blobs.embeddings.data.resize(4 * per_blob);
  blobs.mask = SliceMask(2 * per_blob);
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const bool positive = i >= per_blob;
    blobs.embeddings.data[i * 2] = (positive ? 6.0 : -6.0) + rng.normal();
    blobs.embeddings.data[i * 2 + 1] = rng.normal();
    blobs.mask.member[i] = positive ? 1 : 0;
  }
  return blobs;
}

double training_accuracy(const SlicerModel& model, const Blobs& blobs) {
  const std::vector<double> probs = predict_proba(model, blobs.embeddings);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    hits += (probs[i] >= 0.5) == (blobs.mask.member[i] != 0);
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

}  // namespace

TEST_CASE("logistic slicer separates well-separated blobs") {
  const Blobs blobs = separable_blobs(100, 71);
  TrainConfig config;
  const SlicerModel model = train_slicer(blobs.embeddings, blobs.mask, config);
  CHECK(training_accuracy(model, blobs) >= 0.99);
  CHECK(model.training_meta.final_loss < 0.2);
  // positives score above negatives
  const std::vector<double> probs = predict_proba(model, blobs.embeddings);
  double min_pos = 1.0, max_neg = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (blobs.mask.member[i])
      min_pos = std::min(min_pos, probs[i]);
    else
      max_neg = std::max(max_neg, probs[i]);
  }
  CHECK(min_pos > max_neg);
}

TEST_CASE("mlp slicer also separates the blobs") {
  const Blobs blobs = separable_blobs(100, 73);
  TrainConfig config;
  config.architecture = SlicerArchitecture::kMlp1Hidden;
  config.hidden_dim = 16;
  const SlicerModel model = train_slicer(blobs.embeddings, blobs.mask, config);
  CHECK(training_accuracy(model, blobs) >= 0.99);
}

TEST_CASE("single-class masks are rejected") {
  const Blobs blobs = separable_blobs(20, 77);
  SliceMask all(blobs.embeddings.n);
  for (auto& m : all.member) m = 1;
  CHECK_THROWS_WITH_AS(train_slicer(blobs.embeddings, all, TrainConfig{}),
                       doctest::Contains("single-class"), ConfigError);
  CHECK_THROWS_AS(train_slicer(blobs.embeddings, SliceMask(blobs.embeddings.n), TrainConfig{}),
                  ConfigError);
}

TEST_CASE("training is deterministic per seed") {
  const Blobs blobs = separable_blobs(50, 79);
  TrainConfig config;
  config.seed = 5;
  const SlicerModel a = train_slicer(blobs.embeddings, blobs.mask, config);
  const SlicerModel b = train_slicer(blobs.embeddings, blobs.mask, config);
  CHECK(a == b);
  config.seed = 6;
  const SlicerModel c = train_slicer(blobs.embeddings, blobs.mask, config);
  CHECK(a.w1 != c.w1);
}

TEST_CASE("training loss is non-increasing in the epoch count") {
  const Blobs blobs = separable_blobs(50, 83);
  TrainConfig config;
  double previous = 1e300;
  for (int epochs : {5, 20, 80, 200}) {
    config.epochs = epochs;
    const SlicerModel model = train_slicer(blobs.embeddings, blobs.mask, config);
    CHECK(model.training_meta.final_loss <= previous);
    previous = model.training_meta.final_loss;
  }
}

TEST_CASE("zero-weight model predicts one half everywhere") {
  SlicerModel model;
  model.architecture = SlicerArchitecture::kLogistic;
  model.input_dim = 3;
  model.feature_mean = {0.0, 0.0, 0.0};
  model.feature_scale = {1.0, 1.0, 1.0};
  model.w1 = {0.0, 0.0, 0.0};
  Rng rng(87);
  const EmbeddingSet set = random_embeddings(10, 3, rng);
  for (double p : predict_proba(model, set)) CHECK(p == 0.5);
}

TEST_CASE("predict_proba validates the dimension and keeps the row count") {
  const Blobs blobs = separable_blobs(30, 89);
  const SlicerModel model = train_slicer(blobs.embeddings, blobs.mask, TrainConfig{});
  CHECK(predict_proba(model, blobs.embeddings).size() == blobs.embeddings.n);
  Rng rng(91);
  const EmbeddingSet wrong = random_embeddings(5, 7, rng);
  CHECK_THROWS_AS(predict_proba(model, wrong), InputError);
}

TEST_CASE("model file round trip is bit-exact") {
  const Blobs blobs = separable_blobs(40, 93);
  TrainConfig config;
  config.architecture = SlicerArchitecture::kMlp1Hidden;
  config.hidden_dim = 8;
  const SlicerModel model = train_slicer(blobs.embeddings, blobs.mask, config);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ss_model.json").string();
  save_model(model, path);
  const SlicerModel loaded = load_model(path);
  CHECK(loaded == model);
  CHECK(predict_proba(loaded, blobs.embeddings) == predict_proba(model, blobs.embeddings));
}

TEST_CASE("select_test_slice") {
  SUBCASE("takes the top alpha share") {
    const SliceMask mask = select_test_slice({0.9, 0.1, 0.8, 0.2}, 0.5);
    CHECK(mask == SliceMask::from_indices(4, {0, 2}));
  }
  SUBCASE("alpha = 1 keeps everything") {
    const SliceMask mask = select_test_slice({0.5, 0.4, 0.3}, 1.0);
    CHECK(mask.size() == 3);
  }
  SUBCASE("ties break toward the smaller index") {
    const SliceMask mask = select_test_slice({0.5, 0.5, 0.1}, 1.0 / 3.0);
    CHECK(mask == SliceMask::from_indices(3, {0}));
  }
  SUBCASE("an empty selection is an error") {
    CHECK_THROWS_AS(select_test_slice({0.5, 0.5, 0.1}, 0.1), ConfigError);
  }
}
