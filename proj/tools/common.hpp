#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicescope/dataset.hpp"
#include "slicescope/slice_mask.hpp"

namespace slicescope::cli {

// Shortest round-trip decimal representation.
std::string format_double(double value);

std::string iso8601_now();

std::uint64_t hash_file(const std::string& path);

// Loads SLB1 when the magic matches, otherwise CSV with the conventional
// header: 'loss' required; 'id', 'correct', 'slice_label' optional; a single
// 'embedding' column is packed, any other unrecognized columns are wide
// embedding dimensions.
DatasetBundle load_dataset(const std::string& path);

void write_slice_csv(const std::string& path, const DatasetBundle& bundle, const SliceMask& mask);
SliceMask read_slice_csv(const std::string& path, std::size_t n);

void write_text_file(const std::string& path, const std::string& content);

// Run manifest: every resolved parameter plus input hashes, enough to
// reproduce the run byte-for-byte.
class ManifestBuilder {
 public:
  explicit ManifestBuilder(std::string command);
  void set_parameter(const std::string& key, const nlohmann::json& value);
  void add_input(const std::string& path);
  void add_output(const std::string& path);
  void write(const std::string& path) const;

 private:
  nlohmann::json doc_;
};

void ensure_out_dir(const std::string& dir);

}  // namespace slicescope::cli
