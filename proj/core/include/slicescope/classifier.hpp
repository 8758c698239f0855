#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slicescope/dataset.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope {

enum class SlicerArchitecture { kLogistic, kMlp1Hidden };

struct TrainConfig {
  SlicerArchitecture architecture = SlicerArchitecture::kLogistic;
  std::size_t hidden_dim = 64;  // mlp only
  int epochs = 200;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  // Positive class is upweighted by n_neg / n_pos; slices are small, so
  // unweighted training collapses to the majority class.
  std::uint64_t seed = 0;
};

struct TrainingMeta {
  int epochs = 0;
  double learning_rate = 0.0;
  double final_loss = 0.0;

  bool operator==(const TrainingMeta&) const = default;
};

// Binary membership scorer over embeddings. Inputs are standardized with the
// stored per-dimension constants before the linear layers are applied.
struct SlicerModel {
  SlicerArchitecture architecture = SlicerArchitecture::kLogistic;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  // logistic: w (d), b. mlp: w1 (hidden x d, row-major), b1 (hidden),
  // w2 (hidden), b2.
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  TrainingMeta training_meta;

  bool operator==(const SlicerModel&) const = default;
};

// Full-batch gradient descent on class-weighted binary cross-entropy.
// Deterministic per seed; the epoch step is halved whenever it would
// increase the loss, so training loss is non-increasing.
SlicerModel train_slicer(const EmbeddingSet& embeddings, const SliceMask& mask,
                         const TrainConfig& config);

std::vector<double> predict_proba(const SlicerModel& model, const EmbeddingSet& embeddings);

// Mask of the floor(alpha * n) highest-probability samples; ties toward the
// smaller index.
SliceMask select_test_slice(const std::vector<double>& probabilities, double alpha);

// JSON model file with full-precision parameters; load(save(m)) == m.
void save_model(const SlicerModel& model, const std::string& path);
SlicerModel load_model(const std::string& path);

}  // namespace slicescope
