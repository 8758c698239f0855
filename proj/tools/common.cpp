#include "common.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "slicescope/error.hpp"
#include "slicescope/hash.hpp"
#include "slicescope/version.hpp"

namespace slicescope::cli {

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

DatasetBundle load_dataset(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw InputError("cannot open '" + path + "'");
  char magic[4] = {};
  probe.read(magic, 4);
  if (probe.gcount() == 4 && std::string_view(magic, 4) == "SLB1") return load_binary(path);

  std::string header_line;
  {
    std::ifstream header(path);
    if (!std::getline(header, header_line)) throw InputError("'" + path + "' is empty");
  }
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();

  CsvSchema schema;
  schema.loss_column = "loss";
  std::size_t start = 0;
  std::vector<std::string> columns;
  for (;;) {
    const std::size_t pos = header_line.find(',', start);
    columns.push_back(header_line.substr(start, pos == std::string::npos ? pos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  for (const std::string& name : columns) {
    if (name == "loss") continue;
    if (name == "id")
      schema.id_column = name;
    else if (name == "correct")
      schema.correct_column = name;
    else if (name == "slice_label")
      schema.slice_label_column = name;
    else if (name == "embedding")
      schema.packed_embedding_column = name;
    else
      schema.embedding_columns.push_back(name);
  }
  if (schema.packed_embedding_column && !schema.embedding_columns.empty())
    throw InputError("csv: mixing a packed 'embedding' column with extra columns is ambiguous");
  return load_csv(path, schema);
}

void write_slice_csv(const std::string& path, const DatasetBundle& bundle, const SliceMask& mask) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "index,id\n";
  for (std::size_t i : mask.indices()) out << i << "," << bundle.id_of(i) << "\n";
  if (!out) throw InputError("write to '" + path + "' failed");
}

SliceMask read_slice_csv(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("slice file '" + path + "' is empty");
  SliceMask mask(n);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::size_t comma = line.find(',');
    const std::string field = line.substr(0, comma);
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), index);
    if (ec != std::errc() || ptr != field.data() + field.size())
      throw InputError("slice file '" + path + "' line " + std::to_string(line_no) +
                       ": bad index '" + field + "'");
    if (index >= n)
      throw InputError("slice file '" + path + "' line " + std::to_string(line_no) + ": index " +
                       std::to_string(index) + " out of range for n=" + std::to_string(n));
    mask.member[index] = 1;
  }
  if (mask.size() == 0) throw InputError("slice file '" + path + "' selects no samples");
  return mask;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw InputError("write to '" + path + "' failed");
}

ManifestBuilder::ManifestBuilder(std::string command) {
  doc_["command"] = std::move(command);
  doc_["tool_version"] = std::string(kVersion);
  doc_["started_at"] = iso8601_now();
  doc_["parameters"] = nlohmann::json::object();
  doc_["inputs"] = nlohmann::json::object();
  doc_["outputs"] = nlohmann::json::array();
}

void ManifestBuilder::set_parameter(const std::string& key, const nlohmann::json& value) {
  doc_["parameters"][key] = value;
}

void ManifestBuilder::add_input(const std::string& path) {
  doc_["inputs"][path] = hex_u64(hash_file(path));
}

void ManifestBuilder::add_output(const std::string& path) { doc_["outputs"].push_back(path); }

void ManifestBuilder::write(const std::string& path) const {
  nlohmann::json doc = doc_;
  doc["finished_at"] = iso8601_now();
  write_text_file(path, doc.dump(2) + "\n");
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace slicescope::cli
