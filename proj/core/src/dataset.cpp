#include "slicescope/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "slicescope/error.hpp"
#include "slicescope/hash.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'B', '1'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kFlagCorrect = 1u << 0;
constexpr std::uint32_t kFlagSliceLabel = 1u << 1;
constexpr std::uint32_t kFlagIds = 1u << 2;

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32le(std::vector<std::uint8_t>& out, float v) {
  put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint16_t u16le() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32le() { return std::bit_cast<float>(u32le()); }

  std::string bytes(std::size_t count) {
    need(count);
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), count);
    pos_ += count;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count)
      throw InputError("binary dataset: truncated payload (header declares more data than present)");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// CSV values are parsed as binary32 and widened, keeping every loaded value
// exactly representable in the on-disk format.
double parse_value(std::string_view text, std::size_t line, const std::string& column) {
  float value = 0.0f;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw InputError("csv: line " + std::to_string(line) + ", column '" + column +
                     "': non-numeric cell '" + std::string(text) + "'");
  if (!std::isfinite(value))
    throw InputError("csv: line " + std::to_string(line) + ", column '" + column +
                     "': non-finite value");
  return static_cast<double>(value);
}

std::uint8_t parse_flag(std::string_view text, std::size_t line, const std::string& column) {
  if (text == "1" || text == "true" || text == "True") return 1;
  if (text == "0" || text == "false" || text == "False") return 0;
  throw InputError("csv: line " + std::to_string(line) + ", column '" + column +
                   "': expected 0/1, got '" + std::string(text) + "'");
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
    fields.back().pop_back();
  return fields;
}

}  // namespace

std::string DatasetBundle::id_of(std::size_t i) const {
  if (ids) return (*ids)[i];
  return "row-" + std::to_string(i);
}

void validate_bundle(const DatasetBundle& bundle) {
  const std::size_t n = bundle.embeddings.n;
  const std::size_t d = bundle.embeddings.d;
  if (n < 1 || d < 1) throw InputError("dataset: need n >= 1 and d >= 1");
  if (bundle.embeddings.data.size() != n * d)
    throw InputError("dataset: embedding buffer size does not match n*d");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (!std::isfinite(bundle.embeddings.at(i, j)))
        throw InputError("dataset: non-finite embedding at row " + std::to_string(i) +
                         ", dimension " + std::to_string(j));
  if (bundle.losses.size() != n)
    throw InputError("dataset: loss count " + std::to_string(bundle.losses.size()) +
                     " does not match n=" + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(bundle.losses[i]))
      throw InputError("dataset: non-finite loss at row " + std::to_string(i));
    if (bundle.losses[i] < 0.0)
      throw InputError("dataset: negative loss at row " + std::to_string(i));
  }
  if (bundle.outcomes.correct && bundle.outcomes.correct->size() != n)
    throw InputError("dataset: correctness array length does not match n");
  if (bundle.outcomes.slice_label && bundle.outcomes.slice_label->size() != n)
    throw InputError("dataset: slice label array length does not match n");
  if (bundle.ids && bundle.ids->size() != n)
    throw InputError("dataset: id array length does not match n");
}

DatasetBundle load_csv(const std::string& path, const CsvSchema& schema) {
  if (schema.embedding_columns.empty() == !schema.packed_embedding_column.has_value())
    throw ConfigError("csv schema: set either embedding_columns or packed_embedding_column");

  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open '" + path + "'");

  std::string header_line;
  if (!std::getline(in, header_line)) throw InputError("csv: '" + path + "' is empty");
  const std::vector<std::string> header = split_fields(header_line, ',');

  std::unordered_map<std::string, std::size_t> column_index;
  for (std::size_t i = 0; i < header.size(); ++i) column_index[header[i]] = i;

  auto require = [&](const std::string& name) {
    auto it = column_index.find(name);
    if (it == column_index.end())
      throw InputError("csv: missing column '" + name + "' in '" + path + "'");
    return it->second;
  };

  const std::size_t loss_col = require(schema.loss_column);
  std::optional<std::size_t> id_col, correct_col, label_col, packed_col;
  if (schema.id_column) id_col = require(*schema.id_column);
  if (schema.correct_column) correct_col = require(*schema.correct_column);
  if (schema.slice_label_column) label_col = require(*schema.slice_label_column);
  if (schema.packed_embedding_column) packed_col = require(*schema.packed_embedding_column);
  std::vector<std::size_t> emb_cols;
  for (const auto& name : schema.embedding_columns) emb_cols.push_back(require(name));

  DatasetBundle bundle;
  std::vector<std::uint8_t> correct, labels;
  std::vector<std::string> ids;
  std::size_t d = emb_cols.size();

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_fields(line, ',');
    if (fields.size() != header.size())
      throw InputError("csv: line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));

    if (packed_col) {
      const std::vector<std::string> parts = split_fields(fields[*packed_col], ';');
      if (bundle.embeddings.n == 0) {
        d = parts.size();
      } else if (parts.size() != d) {
        throw InputError("csv: line " + std::to_string(line_no) +
                         ": ragged embedding row (expected " + std::to_string(d) +
                         " values, got " + std::to_string(parts.size()) + ")");
      }
      for (const auto& part : parts)
        bundle.embeddings.data.push_back(
            parse_value(part, line_no, *schema.packed_embedding_column));
    } else {
      for (std::size_t c = 0; c < emb_cols.size(); ++c)
        bundle.embeddings.data.push_back(
            parse_value(fields[emb_cols[c]], line_no, schema.embedding_columns[c]));
    }

    const double loss = parse_value(fields[loss_col], line_no, schema.loss_column);
    if (loss < 0.0)
      throw InputError("csv: line " + std::to_string(line_no) + ", column '" +
                       schema.loss_column + "': negative loss");
    bundle.losses.push_back(loss);

    if (correct_col) correct.push_back(parse_flag(fields[*correct_col], line_no, *schema.correct_column));
    if (label_col) labels.push_back(parse_flag(fields[*label_col], line_no, *schema.slice_label_column));
    if (id_col) ids.push_back(fields[*id_col]);
    ++bundle.embeddings.n;
  }

  if (bundle.embeddings.n == 0) throw InputError("csv: '" + path + "' has no data rows");
  if (d == 0) throw InputError("csv: '" + path + "' has no embedding values");
  bundle.embeddings.d = d;
  if (correct_col) bundle.outcomes.correct = std::move(correct);
  if (label_col) bundle.outcomes.slice_label = std::move(labels);
  if (id_col) bundle.ids = std::move(ids);
  validate_bundle(bundle);
  return bundle;
}

std::vector<std::uint8_t> encode_binary(const DatasetBundle& bundle) {
  validate_bundle(bundle);
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32le(out, kFormatVersion);
  put_u32le(out, static_cast<std::uint32_t>(bundle.embeddings.n));
  put_u32le(out, static_cast<std::uint32_t>(bundle.embeddings.d));
  std::uint32_t flags = 0;
  if (bundle.outcomes.correct) flags |= kFlagCorrect;
  if (bundle.outcomes.slice_label) flags |= kFlagSliceLabel;
  if (bundle.ids) flags |= kFlagIds;
  put_u32le(out, flags);

  for (double v : bundle.embeddings.data) put_f32le(out, static_cast<float>(v));
  for (double v : bundle.losses) put_f32le(out, static_cast<float>(v));
  if (bundle.outcomes.correct)
    out.insert(out.end(), bundle.outcomes.correct->begin(), bundle.outcomes.correct->end());
  if (bundle.outcomes.slice_label)
    out.insert(out.end(), bundle.outcomes.slice_label->begin(), bundle.outcomes.slice_label->end());
  if (bundle.ids) {
    for (const std::string& id : bundle.ids.value()) {
      if (id.size() > 0xFFFF)
        throw InputError("binary dataset: id longer than 65535 bytes");
      put_u16le(out, static_cast<std::uint16_t>(id.size()));
      out.insert(out.end(), id.begin(), id.end());
    }
  }
  return out;
}

DatasetBundle decode_binary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw InputError("binary dataset: unrecognized format (bad magic)");
  ByteReader reader(bytes.subspan(4));

  const std::uint32_t version = reader.u32le();
  if (version != kFormatVersion)
    throw InputError("binary dataset: unsupported version " + std::to_string(version));
  const std::uint32_t n = reader.u32le();
  const std::uint32_t d = reader.u32le();
  const std::uint32_t flags = reader.u32le();
  if (n == 0 || d == 0) throw InputError("binary dataset: header declares empty matrix");

  DatasetBundle bundle;
  bundle.embeddings.n = n;
  bundle.embeddings.d = d;
  bundle.embeddings.data.reserve(static_cast<std::size_t>(n) * d);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i)
    bundle.embeddings.data.push_back(static_cast<double>(reader.f32le()));
  bundle.losses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) bundle.losses.push_back(static_cast<double>(reader.f32le()));

  if (flags & kFlagCorrect) {
    std::vector<std::uint8_t> correct(n);
    for (std::size_t i = 0; i < n; ++i) correct[i] = reader.u8();
    bundle.outcomes.correct = std::move(correct);
  }
  if (flags & kFlagSliceLabel) {
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = reader.u8();
    bundle.outcomes.slice_label = std::move(labels);
  }
  if (flags & kFlagIds) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = reader.bytes(reader.u16le());
    bundle.ids = std::move(ids);
  }
  if (reader.remaining() != 0)
    throw InputError("binary dataset: " + std::to_string(reader.remaining()) +
                     " trailing bytes after payload");
  validate_bundle(bundle);
  return bundle;
}

DatasetBundle load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("binary dataset: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_binary(bytes);
}

void save_binary(const DatasetBundle& bundle, const std::string& path) {
  const std::vector<std::uint8_t> bytes = encode_binary(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("binary dataset: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("binary dataset: write to '" + path + "' failed");
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: need at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ConfigError("split: fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, /*tag=*/1);
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> parts;
  double cumulative = 0.0;
  std::size_t start = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    cumulative += fractions[p];
    const std::size_t end = (p + 1 == fractions.size())
                                ? n
                                : static_cast<std::size_t>(std::floor(cumulative * static_cast<double>(n)));
    if (end <= start)
      throw ConfigError("split: fraction " + std::to_string(fractions[p]) +
                        " produces an empty part at n=" + std::to_string(n));
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(part.begin(), part.end());
    parts.push_back(std::move(part));
    start = end;
  }
  return parts;
}

std::vector<DatasetBundle> split(const DatasetBundle& bundle, const std::vector<double>& fractions,
                                 std::uint64_t seed) {
  const auto parts = split_indices(bundle.n(), fractions, seed);
  std::vector<DatasetBundle> out;
  out.reserve(parts.size());
  for (const auto& part : parts) out.push_back(subset_bundle(bundle, part));
  return out;
}

DatasetBundle subset_bundle(const DatasetBundle& bundle, const std::vector<std::size_t>& indices) {
  DatasetBundle out;
  const std::size_t d = bundle.embeddings.d;
  out.embeddings.n = indices.size();
  out.embeddings.d = d;
  out.embeddings.data.reserve(indices.size() * d);
  out.losses.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto row = bundle.embeddings.row(i);
    out.embeddings.data.insert(out.embeddings.data.end(), row.begin(), row.end());
    out.losses.push_back(bundle.losses[i]);
  }
  if (bundle.outcomes.correct) {
    std::vector<std::uint8_t> correct;
    correct.reserve(indices.size());
    for (std::size_t i : indices) correct.push_back((*bundle.outcomes.correct)[i]);
    out.outcomes.correct = std::move(correct);
  }
  if (bundle.outcomes.slice_label) {
    std::vector<std::uint8_t> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back((*bundle.outcomes.slice_label)[i]);
    out.outcomes.slice_label = std::move(labels);
  }
  if (bundle.ids) {
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (std::size_t i : indices) ids.push_back((*bundle.ids)[i]);
    out.ids = std::move(ids);
  }
  return out;
}

std::uint64_t embedding_content_hash(const EmbeddingSet& embeddings) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + embeddings.data.size() * 4);
  put_u32le(bytes, static_cast<std::uint32_t>(embeddings.n));
  put_u32le(bytes, static_cast<std::uint32_t>(embeddings.d));
  for (double v : embeddings.data) put_f32le(bytes, static_cast<float>(v));
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace slicescope
