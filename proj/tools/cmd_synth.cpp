#include <cstdio>
#include <fstream>

#include "commands.hpp"
#include "common.hpp"
#include "slicescope/coherence.hpp"
#include "slicescope/error.hpp"
#include "slicescope/knn_graph.hpp"
#include "slicescope/synth.hpp"

namespace slicescope::cli {

namespace {

void write_truth_csv(const std::string& path, const SyntheticSetting& setting) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "split,index,id,slice_label\n";
  for (std::size_t i = 0; i < setting.validation.n(); ++i)
    out << "validation," << i << "," << setting.validation.id_of(i) << ","
        << int(setting.planted_mask_val.member[i]) << "\n";
  for (std::size_t i = 0; i < setting.test.n(); ++i)
    out << "test," << i << "," << setting.test.id_of(i) << ","
        << int(setting.planted_mask_test.member[i]) << "\n";
  if (!out) throw InputError("write to '" + path + "' failed");
}

void write_lattice_csv(const std::string& path, const NestedSetting& setting) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "index,id,y,a,cell_y0_a0,cell_y0_a1,cell_y1_a0,cell_y1_a1,y0,y1,a0,a1\n";
  for (std::size_t i = 0; i < setting.data.n(); ++i) {
    const int y = setting.y[i], a = setting.a[i];
    out << i << "," << setting.data.id_of(i) << "," << y << "," << a;
    for (int cy : {0, 1})
      for (int ca : {0, 1}) out << "," << int(y == cy && a == ca);
    out << "," << int(y == 0) << "," << int(y == 1) << "," << int(a == 0) << "," << int(a == 1)
        << "\n";
  }
  if (!out) throw InputError("write to '" + path + "' failed");
}

void print_setting_diagnostics(const SyntheticSetting& setting) {
  GraphBuildConfig graph_config;
  const KnnGraph val_graph = build_knn_graph(setting.validation.embeddings, graph_config);
  const KnnGraph test_graph = build_knn_graph(setting.test.embeddings, graph_config);
  const double purity_val = neighbor_purity(val_graph, setting.cluster_val, 0);
  const double purity_test = neighbor_purity(test_graph, setting.cluster_test, 0);

  auto slice_mean = [](const DatasetBundle& bundle, const SliceMask& mask) {
    double sum = 0.0;
    for (std::size_t i : mask.indices()) sum += bundle.losses[i];
    return sum / static_cast<double>(mask.size());
  };
  auto total_mean = [](const DatasetBundle& bundle) {
    double sum = 0.0;
    for (double l : bundle.losses) sum += l;
    return sum / static_cast<double>(bundle.n());
  };

  std::fprintf(stderr, "planted slice: %zu of %zu validation rows, %zu of %zu test rows\n",
               setting.planted_mask_val.size(), setting.validation.n(),
               setting.planted_mask_test.size(), setting.test.n());
  std::fprintf(stderr, "slice mean loss %.4f vs population %.4f (validation)\n",
               slice_mean(setting.validation, setting.planted_mask_val),
               total_mean(setting.validation));
  std::fprintf(stderr, "planted-cluster neighbor purity: %.4f validation, %.4f test\n",
               purity_val, purity_test);
}

}  // namespace

int cmd_synth(const SynthOptions& options) {
  ensure_out_dir(options.out_dir);
  ManifestBuilder manifest("synth");

  if (options.kind == "nested") {
    NestedParams params;
    params.n = options.n;
    params.dim = options.dim;
    const NestedSetting setting = generate_nested_setting(params, options.seed);
    const std::string data_path = options.out_dir + "/nested.slb";
    save_binary(setting.data, data_path);
    const std::string lattice_path = options.out_dir + "/lattice.csv";
    write_lattice_csv(lattice_path, setting);
    manifest.add_output(data_path);
    manifest.add_output(lattice_path);
    std::fprintf(stderr, "nested setting: %zu rows, cells", setting.data.n());
    for (int y : {0, 1})
      for (int a : {0, 1})
        std::fprintf(stderr, " (y=%d,a=%d)=%zu", y, a, nested_mask(setting, y, a).size());
    std::fprintf(stderr, "\n");
  } else {
    const SettingKind kind = setting_kind_from_string(options.kind);
    SettingParams params;
    params.n_validation = options.n;
    params.n_test = options.n;
    params.dim = options.dim;
    params.clusters = options.clusters;
    params.separation = options.separation;
    const SyntheticSetting setting = generate_setting(kind, params, options.seed);

    const std::string val_path = options.out_dir + "/validation.slb";
    const std::string test_path = options.out_dir + "/test.slb";
    const std::string truth_path = options.out_dir + "/truth.csv";
    save_binary(setting.validation, val_path);
    save_binary(setting.test, test_path);
    write_truth_csv(truth_path, setting);
    manifest.add_output(val_path);
    manifest.add_output(test_path);
    manifest.add_output(truth_path);
    print_setting_diagnostics(setting);
    if (setting.seed != options.seed)
      std::fprintf(stderr, "note: seed advanced to %llu to satisfy the error-slice invariant\n",
                   static_cast<unsigned long long>(setting.seed));
  }

  manifest.set_parameter("kind", options.kind);
  manifest.set_parameter("seed", options.seed);
  manifest.set_parameter("n", options.n);
  manifest.set_parameter("dim", options.dim);
  manifest.set_parameter("clusters", options.clusters);
  manifest.set_parameter("separation", options.separation);
  manifest.set_parameter("out_dir", options.out_dir);
  manifest.write(options.out_dir + "/manifest.json");
  return 0;
}

}  // namespace slicescope::cli
