#pragma once

#include <cstdint>
#include <string>

namespace slicescope::cli {

struct DiscoverOptions {
  std::string input;
  std::string test;           // empty = no test split
  double alpha = 0.0;         // 0 = size rule
  double lambda = 1.0;
  bool tune = false;
  double epsilon = 0.15;
  std::size_t k = 10;
  int slices = 1;
  bool no_classifier = false;
  std::string method = "fw";
  int restarts = 8;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct EvaluateOptions {
  std::string input;
  std::string slice;
  std::size_t k = 10;
  double epsilon = 0.15;
  bool project = false;
  std::string out_dir = ".";
};

struct SynthOptions {
  std::string kind = "correlation";
  std::uint64_t seed = 0;
  std::size_t n = 2000;
  std::size_t dim = 16;
  std::size_t clusters = 5;
  double separation = 8.0;
  std::string out_dir = ".";
};

struct BenchOptions {
  std::string settings_file;  // empty = --quick required
  bool quick = false;
  double alpha = 0.0;
  double lambda = 1.0;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_discover(const DiscoverOptions& options);
int cmd_evaluate(const EvaluateOptions& options);
int cmd_synth(const SynthOptions& options);
int cmd_bench(const BenchOptions& options);

}  // namespace slicescope::cli
