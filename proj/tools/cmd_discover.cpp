#include <cstdio>
#include <optional>

#include <json.hpp>

#include "commands.hpp"
#include "common.hpp"
#include "slicescope/classifier.hpp"
#include "slicescope/error.hpp"
#include "slicescope/evaluation.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/rng.hpp"
#include "slicescope/solver.hpp"
#include "slicescope/synth.hpp"

namespace slicescope::cli {

namespace {

void print_report_line(std::FILE* out, int round, const SliceReport& report) {
  std::fprintf(out, "%-6d %-6zu %-12.6f", round, report.slice_size, report.mean_loss);
  if (report.accuracy)
    std::fprintf(out, " %-10.2f", *report.accuracy * 100.0);
  else
    std::fprintf(out, " %-10s", "-");
  if (report.performance_gap)
    std::fprintf(out, " %-10.2f", *report.performance_gap * 100.0);
  else
    std::fprintf(out, " %-10s", "-");
  std::fprintf(out, " %-12.4f\n", report.coherence.compactness);
}

}  // namespace

int cmd_discover(const DiscoverOptions& options) {
  ensure_out_dir(options.out_dir);
  const DatasetBundle bundle = load_dataset(options.input);

  const double alpha = options.alpha > 0.0 ? options.alpha : default_alpha(bundle.n());
  GraphBuildConfig graph_config;
  graph_config.k = options.k;
  SolverConfig solver_config;
  solver_config.method =
      options.method == "pg" ? SolverMethod::kProjectedGradient : SolverMethod::kFrankWolfe;
  solver_config.restarts = options.restarts;
  solver_config.seed = options.seed;
  EvalConfig eval_config;
  eval_config.epsilon = options.epsilon;

  if (options.no_classifier && !options.test.empty())
    throw ConfigError("--no-classifier evaluates the validation slice; it cannot be combined "
                      "with --test");

  ManifestBuilder manifest("discover");
  manifest.add_input(options.input);

  double lambda = options.lambda;
  std::optional<TuneResult> tuned;
  if (options.tune) {
    TuneConfig tune_config;
    tune_config.alpha = options.alpha;  // 0 keeps the size rule on the halves
    tune_config.epsilon = options.epsilon;
    tune_config.graph = graph_config;
    tune_config.solver = solver_config;
    tune_config.seed = options.seed;
    tuned = tune_lambda(bundle, tune_config);
    lambda = tuned->chosen_lambda;
    if (!tuned->threshold_met)
      std::fprintf(stderr,
                   "warning: no grid lambda met the gap threshold %.4f; using largest-gap "
                   "lambda %.3f\n",
                   tuned->threshold, lambda);
  }

  const std::vector<DiscoverRound> rounds = discover_slices_detailed(
      bundle, graph_config, alpha, lambda, solver_config, options.slices);

  const KnnGraph graph = build_knn_graph(bundle.embeddings, graph_config);

  std::optional<DatasetBundle> test_bundle;
  std::optional<KnnGraph> test_graph;
  if (!options.test.empty()) {
    test_bundle = load_dataset(options.test);
    test_graph = build_knn_graph(test_bundle->embeddings, graph_config);
    manifest.add_input(options.test);
  }

  std::fprintf(stdout, "%-6s %-6s %-12s %-10s %-10s %-12s\n", "slice", "size", "mean_loss",
               "acc(%)", "gap(pp)", "compactness");

  const bool suffixed = options.slices > 1;
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const DiscoverRound& round = rounds[r];
    const std::string tag = suffixed ? "_" + std::to_string(r) : "";

    const std::string slice_path = options.out_dir + "/slice" + tag + ".csv";
    write_slice_csv(slice_path, bundle, round.mask);
    manifest.add_output(slice_path);

    std::vector<std::size_t> global_indices = round.mask.indices();
    const std::string solver_path = options.out_dir + "/solver" + tag + ".json";
    write_text_file(solver_path, solver_result_to_json(round.result, global_indices) + "\n");
    manifest.add_output(solver_path);

    SliceReport report;
    if (test_bundle) {
      TrainConfig trainer;
      trainer.seed = Rng::mix(options.seed, 60 + r);
      const SlicerModel model = train_slicer(bundle.embeddings, round.mask, trainer);
      const std::string model_path = options.out_dir + "/model" + tag + ".json";
      save_model(model, model_path);
      manifest.add_output(model_path);

      const std::vector<double> probs = predict_proba(model, test_bundle->embeddings);
      const SliceMask test_mask = select_test_slice(probs, alpha);
      const std::string test_slice_path = options.out_dir + "/test_slice" + tag + ".csv";
      write_slice_csv(test_slice_path, *test_bundle, test_mask);
      manifest.add_output(test_slice_path);
      report = evaluate_slice(*test_bundle, *test_graph, test_mask, eval_config, probs);
    } else {
      report = evaluate_slice(bundle, graph, round.mask, eval_config);
    }

    const std::string report_path = options.out_dir + "/report" + tag + ".json";
    write_text_file(report_path, slice_report_to_json(report) + "\n");
    manifest.add_output(report_path);
    print_report_line(stdout, static_cast<int>(r), report);
  }

  manifest.set_parameter("input", options.input);
  manifest.set_parameter("test", options.test);
  manifest.set_parameter("alpha", alpha);
  manifest.set_parameter("lambda", lambda);
  manifest.set_parameter("tuned", options.tune);
  if (tuned) {
    nlohmann::json grid = nlohmann::json::array();
    for (const TuneEntry& entry : tuned->per_lambda)
      grid.push_back({{"lambda", entry.lambda},
                      {"slice_performance", entry.slice_performance},
                      {"gap", entry.gap},
                      {"compactness", entry.compactness},
                      {"qualifies", entry.qualifies}});
    manifest.set_parameter("tune_grid", grid);
    manifest.set_parameter("tune_threshold_met", tuned->threshold_met);
  }
  manifest.set_parameter("epsilon", options.epsilon);
  manifest.set_parameter("k", options.k);
  manifest.set_parameter("slices", options.slices);
  manifest.set_parameter("no_classifier", options.no_classifier);
  manifest.set_parameter("method", options.method);
  manifest.set_parameter("restarts", options.restarts);
  manifest.set_parameter("seed", options.seed);
  manifest.set_parameter("out_dir", options.out_dir);
  manifest.write(options.out_dir + "/manifest.json");
  return 0;
}

}  // namespace slicescope::cli
