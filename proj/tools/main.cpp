#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "slicescope/error.hpp"
#include "slicescope/version.hpp"

namespace cli = slicescope::cli;

int main(int argc, char** argv) {
  CLI::App app{"slicescope: coherent error-slice discovery over embeddings and losses"};
  app.set_version_flag("--version", std::string(slicescope::kVersion));
  app.require_subcommand(1);

  cli::DiscoverOptions discover;
  CLI::App* cmd_discover = app.add_subcommand(
      "discover", "Discover high-error coherent slices in a validation dataset");
  cmd_discover->add_option("--input", discover.input, "Dataset (.slb or .csv)")->required();
  cmd_discover->add_option("--test", discover.test,
                           "Test dataset; scores it with a slicing function fit on the "
                           "discovered slice");
  cmd_discover->add_option("--alpha", discover.alpha,
                           "Slice size proportion (default: 0.05 below 5000 rows, else 0.01)");
  cmd_discover->add_option("--lambda", discover.lambda, "Coherence coefficient (default 1)");
  cmd_discover->add_flag("--tune", discover.tune, "Pick lambda from the default grid");
  cmd_discover->add_option("--epsilon", discover.epsilon,
                           "Accuracy-gap threshold, fraction (default 0.15)");
  cmd_discover->add_option("--k", discover.k, "kNN graph neighbors (default 10)");
  cmd_discover->add_option("--slices", discover.slices, "Number of slices to extract");
  cmd_discover->add_flag("--no-classifier", discover.no_classifier,
                         "Evaluate the raw validation slice without a slicing function");
  cmd_discover->add_option("--method", discover.method, "Solver: fw or pg")
      ->check(CLI::IsMember({"fw", "pg"}));
  cmd_discover->add_option("--restarts", discover.restarts, "Solver restarts (default 8)");
  cmd_discover->add_option("--seed", discover.seed, "Master seed");
  cmd_discover->add_option("--out-dir", discover.out_dir, "Output directory");

  cli::EvaluateOptions evaluate;
  CLI::App* cmd_evaluate =
      app.add_subcommand("evaluate", "Score a slice file against a dataset");
  cmd_evaluate->add_option("--input", evaluate.input, "Dataset (.slb or .csv)")->required();
  cmd_evaluate->add_option("--slice", evaluate.slice, "Slice indices CSV")->required();
  cmd_evaluate->add_option("--k", evaluate.k, "kNN graph neighbors (default 10)");
  cmd_evaluate->add_option("--epsilon", evaluate.epsilon,
                           "Accuracy-gap threshold, fraction (default 0.15)");
  cmd_evaluate->add_flag("--project", evaluate.project, "Write a 2-component PCA CSV");
  cmd_evaluate->add_option("--out-dir", evaluate.out_dir, "Output directory");

  cli::SynthOptions synth;
  CLI::App* cmd_synth =
      app.add_subcommand("synth", "Generate a planted-slice benchmark dataset");
  cmd_synth->add_option("--kind", synth.kind, "correlation, rare, noisy or nested")
      ->check(CLI::IsMember({"correlation", "rare", "noisy", "nested"}));
  cmd_synth->add_option("--seed", synth.seed, "Generator seed");
  cmd_synth->add_option("--n", synth.n, "Rows per split (default 2000)");
  cmd_synth->add_option("--dim", synth.dim, "Embedding dimension (default 16)");
  cmd_synth->add_option("--clusters", synth.clusters, "Mixture components (default 5)");
  cmd_synth->add_option("--separation", synth.separation, "Cluster separation (default 8)");
  cmd_synth->add_option("--out-dir", synth.out_dir, "Output directory");

  cli::BenchOptions bench;
  CLI::App* cmd_bench =
      app.add_subcommand("bench", "Run the planted-slice benchmark table");
  cmd_bench->add_option("settings", bench.settings_file, "Settings JSON file");
  cmd_bench->add_flag("--quick", bench.quick, "3 settings per kind at 1000 rows");
  cmd_bench->add_option("--alpha", bench.alpha, "Slice size proportion (default: size rule)");
  cmd_bench->add_option("--lambda", bench.lambda, "Coherence coefficient (default 1)");
  cmd_bench->add_option("--k", bench.k, "kNN graph neighbors (default 10)");
  cmd_bench->add_option("--seed", bench.seed, "Master seed");
  cmd_bench->add_option("--out-dir", bench.out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_discover->parsed()) return cli::cmd_discover(discover);
    if (cmd_evaluate->parsed()) return cli::cmd_evaluate(evaluate);
    if (cmd_synth->parsed()) return cli::cmd_synth(synth);
    if (cmd_bench->parsed()) return cli::cmd_bench(bench);
  } catch (const slicescope::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const slicescope::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
