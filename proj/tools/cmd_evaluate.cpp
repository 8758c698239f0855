#include <cstdio>
#include <fstream>

#include "commands.hpp"
#include "common.hpp"
#include "slicescope/error.hpp"
#include "slicescope/evaluation.hpp"
#include "slicescope/knn_graph.hpp"

namespace slicescope::cli {

int cmd_evaluate(const EvaluateOptions& options) {
  ensure_out_dir(options.out_dir);
  const DatasetBundle bundle = load_dataset(options.input);
  const SliceMask mask = read_slice_csv(options.slice, bundle.n());

  GraphBuildConfig graph_config;
  graph_config.k = options.k;
  const KnnGraph graph = build_knn_graph(bundle.embeddings, graph_config);

  EvalConfig eval_config;
  eval_config.epsilon = options.epsilon;
  const SliceReport report = evaluate_slice(bundle, graph, mask, eval_config);

  std::fprintf(stdout, "%-14s %s\n", "slice_size", std::to_string(report.slice_size).c_str());
  std::fprintf(stdout, "%-14s %.6f\n", "mean_loss", report.mean_loss);
  if (report.accuracy) std::fprintf(stdout, "%-14s %.2f\n", "acc(%)", *report.accuracy * 100.0);
  if (report.overall_accuracy)
    std::fprintf(stdout, "%-14s %.2f\n", "overall(%)", *report.overall_accuracy * 100.0);
  if (report.performance_gap)
    std::fprintf(stdout, "%-14s %.2f\n", "gap(pp)", *report.performance_gap * 100.0);
  if (report.epsilon_satisfied)
    std::fprintf(stdout, "%-14s %s\n", "underperforms", *report.epsilon_satisfied ? "yes" : "no");
  std::fprintf(stdout, "%-14s %.4f\n", "compactness", report.coherence.compactness);
  for (const auto& [k, value] : report.precision_at)
    std::fprintf(stdout, "precision@%-4zu %.2f\n", k, value * 100.0);
  if (report.average_precision)
    std::fprintf(stdout, "%-14s %.2f\n", "avg_precision", *report.average_precision * 100.0);

  ManifestBuilder manifest("evaluate");
  manifest.add_input(options.input);
  manifest.add_input(options.slice);

  const std::string report_path = options.out_dir + "/report.json";
  write_text_file(report_path, slice_report_to_json(report) + "\n");
  manifest.add_output(report_path);

  if (options.project) {
    const Projection2D projection = project_2d(bundle.embeddings);
    if (projection.pc2_degenerate)
      std::fprintf(stderr, "warning: input is collinear; second component set to zero\n");
    const std::string proj_path = options.out_dir + "/projection.csv";
    std::ofstream out(proj_path, std::ios::trunc);
    if (!out) throw InputError("cannot open '" + proj_path + "' for writing");
    out << "id,pc1,pc2,in_slice,loss,correct\n";
    for (std::size_t i = 0; i < bundle.n(); ++i) {
      out << bundle.id_of(i) << "," << format_double(projection.coords[i * 2]) << ","
          << format_double(projection.coords[i * 2 + 1]) << "," << (mask.contains(i) ? 1 : 0)
          << "," << format_double(bundle.losses[i]) << ",";
      if (bundle.outcomes.correct) out << int((*bundle.outcomes.correct)[i]);
      out << "\n";
    }
    if (!out) throw InputError("write to '" + proj_path + "' failed");
    manifest.add_output(proj_path);
  }

  manifest.set_parameter("input", options.input);
  manifest.set_parameter("slice", options.slice);
  manifest.set_parameter("k", options.k);
  manifest.set_parameter("epsilon", options.epsilon);
  manifest.set_parameter("project", options.project);
  manifest.set_parameter("out_dir", options.out_dir);
  manifest.write(options.out_dir + "/manifest.json");
  return 0;
}

}  // namespace slicescope::cli
