#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slicescope {

// n x d matrix of feature embeddings, row-major. Row order is the canonical
// sample index used by every other type. Values are held as doubles but are
// canonicalized to binary32 at load time so that the 32-bit on-disk format
// round-trips bit-exactly.
struct EmbeddingSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
  double at(std::size_t i, std::size_t j) const { return data[i * d + j]; }

  bool operator==(const EmbeddingSet&) const = default;
};

using LossVector = std::vector<double>;

// Per-sample metadata: model correctness (for accuracy reporting) and
// ground-truth slice membership (for precision metrics). Either may be absent.
struct OutcomeVector {
  std::optional<std::vector<std::uint8_t>> correct;
  std::optional<std::vector<std::uint8_t>> slice_label;

  bool operator==(const OutcomeVector&) const = default;
};

struct DatasetBundle {
  EmbeddingSet embeddings;
  LossVector losses;
  OutcomeVector outcomes;
  std::optional<std::vector<std::string>> ids;

  std::size_t n() const { return embeddings.n; }

  // Identifier of row i; defaults to "row-<index>" when ids are absent.
  std::string id_of(std::size_t i) const;

  bool operator==(const DatasetBundle&) const = default;
};

// Column mapping for load_csv. Embeddings come either from a list of wide
// columns (one per dimension) or from a single packed column of
// ';'-delimited floats; exactly one of the two must be set.
struct CsvSchema {
  std::optional<std::string> id_column;
  std::string loss_column;
  std::optional<std::string> correct_column;
  std::optional<std::string> slice_label_column;
  std::vector<std::string> embedding_columns;
  std::optional<std::string> packed_embedding_column;
};

// Throws InputError if any invariant fails (length mismatch, non-finite
// value, negative loss).
void validate_bundle(const DatasetBundle& bundle);

DatasetBundle load_csv(const std::string& path, const CsvSchema& schema);

// Framed binary format "SLB1"; see save_binary for the layout. Loading a
// saved bundle reproduces it exactly.
DatasetBundle load_binary(const std::string& path);
void save_binary(const DatasetBundle& bundle, const std::string& path);

// In-memory codec behind load_binary/save_binary; also used for hashing and
// byte-level round-trip checks.
std::vector<std::uint8_t> encode_binary(const DatasetBundle& bundle);
DatasetBundle decode_binary(std::span<const std::uint8_t> bytes);

// Deterministic partition of 0..n-1 into parts sized by cumulative-floor
// boundaries of the fractions. Each part is sorted ascending.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed);

std::vector<DatasetBundle> split(const DatasetBundle& bundle,
                                 const std::vector<double>& fractions, std::uint64_t seed);

// Rows of `bundle` at `indices`, in the given order.
DatasetBundle subset_bundle(const DatasetBundle& bundle, const std::vector<std::size_t>& indices);

// Fingerprint of the embedding payload (n, d and the binary32 image of every
// value); used to invalidate kNN graph caches.
std::uint64_t embedding_content_hash(const EmbeddingSet& embeddings);

}  // namespace slicescope
