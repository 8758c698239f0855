#include "slicescope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "slicescope/coherence.hpp"
#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

double half_sqrt2(double separation) { return separation / std::sqrt(2.0); }

double draw_loss(Rng& rng, double mean, double std) { return std::abs(rng.normal(mean, std)); }

double mean_of(const std::vector<double>& values, const std::vector<std::size_t>& idx) {
  double sum = 0.0;
  for (std::size_t i : idx) sum += values[i];
  return sum / static_cast<double>(idx.size());
}

struct MixtureDraw {
  DatasetBundle bundle;
  std::vector<std::uint32_t> cluster;
  SliceMask planted;
};

// One bundle of the single-planted-slice settings. Cluster centers sit on
// scaled coordinate axes so that every pair is exactly `separation` apart.
MixtureDraw draw_setting_bundle(SettingKind kind, const SettingParams& params, std::size_t n,
                                Rng& rng, const std::string& id_prefix) {
  const std::size_t d = params.dim;
  const std::size_t c = params.clusters;
  const std::uint32_t planted_cluster = 0;

  std::vector<double> priors(c, 1.0 / static_cast<double>(c));
  if (kind == SettingKind::kRare) {
    priors.assign(c, (1.0 - params.rare_prior) / static_cast<double>(c - 1));
    priors[planted_cluster] = params.rare_prior;
  }

  MixtureDraw draw;
  draw.bundle.embeddings.n = n;
  draw.bundle.embeddings.d = d;
  draw.bundle.embeddings.data.resize(n * d);
  draw.cluster.resize(n);
  draw.planted = SliceMask(n);
  std::vector<std::uint8_t> correct(n, 0);
  std::vector<std::string> ids(n);

  const double center = half_sqrt2(params.separation);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::uint32_t cl = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (u < priors[j] || j + 1 == c) {
        cl = static_cast<std::uint32_t>(j);
        break;
      }
      u -= priors[j];
    }
    draw.cluster[i] = cl;
    double* row = draw.bundle.embeddings.data.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] = params.cluster_std * rng.normal();
    row[cl] += center;

    bool in_slice = false;
    bool is_correct;
    switch (kind) {
      case SettingKind::kCorrelation:
      case SettingKind::kRare:
        in_slice = cl == planted_cluster;
        is_correct = rng.bernoulli(in_slice ? params.p_bad : params.p_good);
        break;
      case SettingKind::kNoisy:
        is_correct = rng.bernoulli(params.p_good);
        if (cl == planted_cluster && rng.bernoulli(params.noisy_fraction)) {
          in_slice = true;
          is_correct = false;
        }
        break;
    }
    correct[i] = is_correct ? 1 : 0;
    draw.planted.member[i] = in_slice ? 1 : 0;
    const double loss = is_correct
                            ? draw_loss(rng, params.loss.correct_mean, params.loss.correct_std)
                            : draw_loss(rng, params.loss.incorrect_mean, params.loss.incorrect_std);
    // Canonicalize to the on-disk precision so generated bundles round-trip.
    draw.bundle.losses.push_back(static_cast<double>(static_cast<float>(loss)));
    ids[i] = id_prefix + "-" + std::to_string(i);
  }
  for (double& v : draw.bundle.embeddings.data) v = static_cast<double>(static_cast<float>(v));
  draw.bundle.outcomes.correct = std::move(correct);
  draw.bundle.outcomes.slice_label = draw.planted.member;
  draw.bundle.ids = std::move(ids);
  return draw;
}

bool planted_slice_is_errorful(const MixtureDraw& draw) {
  const std::vector<std::size_t> members = draw.planted.indices();
  if (members.empty()) return false;
  double population = 0.0;
  for (double l : draw.bundle.losses) population += l;
  population /= static_cast<double>(draw.bundle.losses.size());
  return mean_of(draw.bundle.losses, members) > population;
}

}  // namespace

std::string to_string(SettingKind kind) {
  switch (kind) {
    case SettingKind::kCorrelation: return "correlation";
    case SettingKind::kRare: return "rare";
    case SettingKind::kNoisy: return "noisy";
  }
  return "unknown";
}

SettingKind setting_kind_from_string(const std::string& name) {
  if (name == "correlation") return SettingKind::kCorrelation;
  if (name == "rare") return SettingKind::kRare;
  if (name == "noisy") return SettingKind::kNoisy;
  throw ConfigError("synth: unknown setting kind '" + name + "'");
}

SyntheticSetting generate_setting(SettingKind kind, const SettingParams& params,
                                  std::uint64_t seed) {
  if (params.clusters < 2) throw ConfigError("synth: need at least 2 clusters");
  if (params.clusters > params.dim)
    throw ConfigError("synth: cluster count must not exceed the dimension");
  const double planted_fraction = kind == SettingKind::kRare
                                      ? params.rare_prior
                                      : 1.0 / static_cast<double>(params.clusters);
  if (!(planted_fraction > 0.0 && planted_fraction < 0.5))
    throw ConfigError("synth: planted cluster fraction must lie in (0, 0.5)");
  if (params.n_validation < 2 || params.n_test < 2)
    throw ConfigError("synth: need at least 2 samples per split");
  if (!(params.p_bad < params.p_good))
    throw ConfigError("synth: p_bad must be below p_good");

  for (int attempt = 0; attempt < 5; ++attempt) {
    const std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(attempt);
    Rng val_rng = Rng::stream(attempt_seed, 10);
    Rng test_rng = Rng::stream(attempt_seed, 11);
    MixtureDraw val = draw_setting_bundle(kind, params, params.n_validation, val_rng, "va");
    MixtureDraw test = draw_setting_bundle(kind, params, params.n_test, test_rng, "te");
    if (!planted_slice_is_errorful(val) || !planted_slice_is_errorful(test)) continue;

    SyntheticSetting setting;
    setting.kind = kind;
    setting.validation = std::move(val.bundle);
    setting.test = std::move(test.bundle);
    setting.planted_mask_val = std::move(val.planted);
    setting.planted_mask_test = std::move(test.planted);
    setting.cluster_val = std::move(val.cluster);
    setting.cluster_test = std::move(test.cluster);
    setting.params = params;
    setting.seed = attempt_seed;
    return setting;
  }
  throw ConfigError("synth: could not generate a valid setting in 5 attempts (degenerate params)");
}

double neighbor_purity(const KnnGraph& graph, const std::vector<std::uint32_t>& cluster,
                       std::uint32_t target_cluster) {
  std::size_t edges = 0, internal = 0;
  for (std::size_t i = 0; i < graph.n; ++i) {
    if (cluster[i] != target_cluster) continue;
    for (std::uint32_t j : graph.row(i)) {
      ++edges;
      internal += cluster[j] == target_cluster;
    }
  }
  if (edges == 0) throw ConfigError("synth: empty planted cluster");
  return static_cast<double>(internal) / static_cast<double>(edges);
}

NestedSetting generate_nested_setting(const NestedParams& params, std::uint64_t seed) {
  const std::size_t n = params.n, d = params.dim;
  if (d < 2 + params.aniso_dims)
    throw ConfigError("nested: dimension too small for the anisotropic profile");
  if (n < 8) throw ConfigError("nested: need at least 8 samples");

  Rng rng = Rng::stream(seed, 20);
  NestedSetting setting;
  setting.params = params;
  setting.seed = seed;
  setting.data.embeddings.n = n;
  setting.data.embeddings.d = d;
  setting.data.embeddings.data.resize(n * d);
  setting.y.resize(n);
  setting.a.resize(n);
  std::vector<std::uint8_t> correct(n, 0);
  std::vector<std::uint8_t> labels(n, 0);
  std::vector<std::string> ids(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t yl = rng.bernoulli(0.5) ? 1 : 0;
    const std::uint8_t al = rng.bernoulli(0.5) ? 1 : 0;
    setting.y[i] = yl;
    setting.a[i] = al;
    double* row = setting.data.embeddings.data.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      double std_j = params.base_std;
      if (al == 1 && j >= 2 && j < 2 + params.aniso_dims) std_j = params.aniso_std;
      row[j] = std_j * rng.normal();
    }
    row[0] += (yl == 1 ? 0.5 : -0.5) * params.coarse_separation;
    row[1] += (al == 1 ? 0.5 : -0.5) * params.fine_separation;

    const bool in_slice = yl == 1 && al == 1;
    const bool is_correct = rng.bernoulli(in_slice ? params.p_bad : params.p_good);
    correct[i] = is_correct ? 1 : 0;
    labels[i] = in_slice ? 1 : 0;
    const double loss = is_correct
                            ? draw_loss(rng, params.loss.correct_mean, params.loss.correct_std)
                            : draw_loss(rng, params.loss.incorrect_mean, params.loss.incorrect_std);
    setting.data.losses.push_back(static_cast<double>(static_cast<float>(loss)));
    ids[i] = "nx-" + std::to_string(i);
  }
  for (double& v : setting.data.embeddings.data) v = static_cast<double>(static_cast<float>(v));
  setting.data.outcomes.correct = std::move(correct);
  setting.data.outcomes.slice_label = std::move(labels);
  setting.data.ids = std::move(ids);
  return setting;
}

SliceMask nested_mask(const NestedSetting& setting, int y, int a) {
  SliceMask mask(setting.data.n());
  for (std::size_t i = 0; i < setting.data.n(); ++i) {
    if (y >= 0 && setting.y[i] != static_cast<std::uint8_t>(y)) continue;
    if (a >= 0 && setting.a[i] != static_cast<std::uint8_t>(a)) continue;
    mask.member[i] = 1;
  }
  return mask;
}

std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> nested_lattice_edges() {
  std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;
  for (int y : {0, 1}) edges.push_back({{-1, -1}, {y, -1}});
  for (int a : {0, 1}) edges.push_back({{-1, -1}, {-1, a}});
  for (int y : {0, 1})
    for (int a : {0, 1}) {
      edges.push_back({{y, -1}, {y, a}});
      edges.push_back({{-1, a}, {y, a}});
    }
  return edges;
}

MultiSliceSetting generate_multi_slice_setting(const MultiSliceParams& params,
                                               std::uint64_t seed) {
  const std::size_t m = params.planted_fractions.size();
  if (m < 1 || m != params.planted_incorrect_means.size())
    throw ConfigError("multi-slice: planted fraction and loss lists must match and be non-empty");
  double planted_total = 0.0;
  for (double f : params.planted_fractions) {
    if (f <= 0.0) throw ConfigError("multi-slice: fractions must be positive");
    planted_total += f;
  }
  if (planted_total >= 0.9) throw ConfigError("multi-slice: planted clusters leave no background");
  if (m + 1 > params.dim) throw ConfigError("multi-slice: dimension too small for cluster count");

  Rng rng = Rng::stream(seed, 30);
  const std::size_t n = params.n, d = params.dim;
  MultiSliceSetting setting;
  setting.params = params;
  setting.seed = seed;
  setting.data.embeddings.n = n;
  setting.data.embeddings.d = d;
  setting.data.embeddings.data.resize(n * d);
  setting.cluster.resize(n);
  setting.planted.assign(m, SliceMask(n));
  std::vector<std::uint8_t> correct(n, 0);
  std::vector<std::string> ids(n);

  const double center = half_sqrt2(params.separation);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::uint32_t cl = 0;  // background
    for (std::size_t j = 0; j < m; ++j) {
      if (u < params.planted_fractions[j]) {
        cl = static_cast<std::uint32_t>(j + 1);
        break;
      }
      u -= params.planted_fractions[j];
    }
    setting.cluster[i] = cl;
    double* row = setting.data.embeddings.data.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] = params.cluster_std * rng.normal();
    row[cl] += center;

    const bool planted = cl > 0;
    const bool is_correct = rng.bernoulli(planted ? params.p_bad : params.p_good);
    correct[i] = is_correct ? 1 : 0;
    if (planted) setting.planted[cl - 1].member[i] = 1;
    const double incorrect_mean =
        planted ? params.planted_incorrect_means[cl - 1] : params.loss.incorrect_mean;
    const double loss = is_correct
                            ? draw_loss(rng, params.loss.correct_mean, params.loss.correct_std)
                            : draw_loss(rng, incorrect_mean, params.loss.incorrect_std);
    setting.data.losses.push_back(static_cast<double>(static_cast<float>(loss)));
    ids[i] = "ms-" + std::to_string(i);
  }
  for (double& v : setting.data.embeddings.data) v = static_cast<double>(static_cast<float>(v));
  for (const SliceMask& mask : setting.planted)
    if (mask.size() == 0) throw ConfigError("multi-slice: a planted cluster came out empty");
  setting.data.outcomes.correct = std::move(correct);
  setting.data.ids = std::move(ids);
  return setting;
}

TuneResult tune_lambda(const DatasetBundle& validation, const TuneConfig& config) {
  if (config.grid.empty()) throw ConfigError("tune: empty lambda grid");
  if (!validation.outcomes.correct)
    throw ConfigError("tune: correctness labels are required to measure the gap");

  const std::vector<DatasetBundle> halves = split(validation, {0.5, 0.5}, config.seed);
  const DatasetBundle& fit_half = halves[0];
  const DatasetBundle& held_half = halves[1];
  const double alpha = config.alpha > 0.0 ? config.alpha : default_alpha(fit_half.n());

  const KnnGraph fit_graph = build_knn_graph(fit_half.embeddings, config.graph);
  const KnnGraph held_graph = build_knn_graph(held_half.embeddings, config.graph);
  const auto& held_correct = *held_half.outcomes.correct;
  double overall = 0.0;
  for (std::uint8_t v : held_correct) overall += v != 0;
  overall /= static_cast<double>(held_half.n());

  TuneResult result;
  result.lambda_grid = config.grid;
  result.threshold = config.epsilon;
  for (double lambda : config.grid) {
    const QpProblem problem = make_problem(fit_graph, fit_half.losses, lambda, alpha);
    const SolverResult solved = solve(problem, config.solver);
    const SliceMask fit_mask = extract_slice(solved, problem);

    TrainConfig trainer = config.trainer;
    trainer.seed = Rng::mix(config.seed, 40);
    const SlicerModel model = train_slicer(fit_half.embeddings, fit_mask, trainer);
    const std::vector<double> probs = predict_proba(model, held_half.embeddings);
    const SliceMask held_mask = select_test_slice(probs, alpha);

    TuneEntry entry;
    entry.lambda = lambda;
    double hits = 0.0;
    for (std::size_t i : held_mask.indices()) hits += held_correct[i] != 0;
    entry.slice_performance = hits / static_cast<double>(held_mask.size());
    entry.gap = overall - entry.slice_performance;
    entry.compactness = manifold_compactness(held_graph, held_mask);
    entry.qualifies = entry.gap >= config.epsilon;
    result.per_lambda.push_back(entry);
  }

  const TuneEntry* chosen = nullptr;
  for (const TuneEntry& entry : result.per_lambda) {
    if (!entry.qualifies) continue;
    if (!chosen || entry.compactness > chosen->compactness) chosen = &entry;
  }
  result.threshold_met = chosen != nullptr;
  if (!chosen) {
    for (const TuneEntry& entry : result.per_lambda)
      if (!chosen || entry.gap > chosen->gap) chosen = &entry;
  }
  result.chosen_lambda = chosen->lambda;
  return result;
}

BenchmarkResult run_benchmark(const std::vector<SyntheticSetting>& settings,
                              const BenchmarkConfig& config) {
  if (settings.empty()) throw ConfigError("benchmark: no settings");

  BenchmarkResult result;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const SyntheticSetting& setting = settings[s];
    const double alpha =
        config.alpha > 0.0 ? config.alpha : default_alpha(setting.validation.n());
    const KnnGraph val_graph = build_knn_graph(setting.validation.embeddings, config.graph);
    const KnnGraph test_graph = build_knn_graph(setting.test.embeddings, config.graph);

    std::vector<std::pair<std::string, double>> methods = {{"mcsd", config.lambda},
                                                           {"top_loss", 0.0}};
    if (config.lambda == 0.0) methods.erase(methods.begin());  // rows would coincide
    for (const auto& [method, lambda] : methods) {
      const QpProblem problem =
          make_problem(val_graph, setting.validation.losses, lambda, alpha);
      const SolverResult solved = solve(problem, config.solver);
      const SliceMask val_mask = extract_slice(solved, problem);

      TrainConfig trainer = config.trainer;
      trainer.seed = Rng::mix(setting.seed, 50);
      const SlicerModel model = train_slicer(setting.validation.embeddings, val_mask, trainer);
      const std::vector<double> probs = predict_proba(model, setting.test.embeddings);
      const SliceMask test_mask = select_test_slice(probs, alpha);

      BenchmarkRow row;
      row.method = method;
      row.kind = setting.kind;
      row.setting_index = s;
      row.report = evaluate_slice(setting.test, test_graph, test_mask, config.eval, probs);
      result.rows.push_back(std::move(row));
    }
  }

  // Mean of each metric per (method, kind), in first-appearance order.
  for (const BenchmarkRow& row : result.rows) {
    BenchmarkAggregate* agg = nullptr;
    for (BenchmarkAggregate& candidate : result.aggregates)
      if (candidate.method == row.method && candidate.kind == row.kind) agg = &candidate;
    if (!agg) {
      result.aggregates.push_back({row.method, row.kind, 0, 0.0, 0.0, 0.0, 0.0});
      agg = &result.aggregates.back();
    }
    ++agg->settings;
    auto at10 = row.report.precision_at.find(10);
    auto at25 = row.report.precision_at.find(25);
    if (at10 != row.report.precision_at.end()) agg->precision_at_10 += at10->second;
    if (at25 != row.report.precision_at.end()) agg->precision_at_25 += at25->second;
    if (row.report.average_precision) agg->average_precision += *row.report.average_precision;
    agg->compactness += row.report.coherence.compactness;
  }
  for (BenchmarkAggregate& agg : result.aggregates) {
    const double count = static_cast<double>(agg.settings);
    agg.precision_at_10 /= count;
    agg.precision_at_25 /= count;
    agg.average_precision /= count;
    agg.compactness /= count;
  }
  return result;
}

}  // namespace slicescope
