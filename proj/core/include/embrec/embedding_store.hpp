#pragma once

// Dense per-item embedding matrices and the EMB1 file format.
//
// EMB1 (little-endian): "EMB1", u32 row count, u32 dim, then for each row a
// u16 id byte-length, the UTF-8 id bytes and dim float32 values. Files that do
// not start with the magic are parsed as text: a header line `id,dim=<d>`
// followed by `id,v1,...,vd` rows.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "embrec/matrix.hpp"

namespace embrec {

/// Immutable item-id-indexed embedding store with cached row norms.
///
/// Construction validates every invariant: unique ids, dim > 0, finite
/// entries and nonzero row norms (a zero row has no defined cosine).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::vector<std::string> item_ids, std::size_t dim, std::vector<double> values);
  EmbeddingMatrix(std::vector<std::string> item_ids, const Matrix& rows);

  std::size_t size() const noexcept { return item_ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::string& item_id(std::size_t row) const { return item_ids_[row]; }

  std::optional<std::size_t> find(std::string_view item_id) const;
  /// Throws NotFoundError for unknown ids.
  std::size_t index_of(std::string_view item_id) const;
  bool contains(std::string_view item_id) const { return find(item_id).has_value(); }

  std::span<const double> row(std::size_t index) const {
    return {values_.data() + index * dim_, dim_};
  }
  std::span<const double> row(std::string_view item_id) const { return row(index_of(item_id)); }
  double norm(std::size_t index) const { return norms_[index]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Cosine similarity between two rows by index.
  double cosine(std::size_t a, std::size_t b) const;

  /// Copy with every value rounded through float32, i.e. what a save/load
  /// round trip through EMB1 yields.
  EmbeddingMatrix rounded_to_float32() const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.item_ids_ == b.item_ids_ && a.values_ == b.values_;
  }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> item_ids_;
  std::size_t dim_;
  std::vector<double> values_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

/// Loads an EMB1 file, or the text fallback when the magic is absent.
/// Errors carry the byte offset (binary) or line number (text).
EmbeddingMatrix load_embeddings(const std::string& path);

/// Parses an in-memory EMB1 or text buffer; `source` labels error messages.
EmbeddingMatrix parse_embeddings(std::span<const std::byte> bytes, const std::string& source);

/// Writes EMB1. Values are narrowed to float32.
void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path);
std::vector<std::byte> encode_embeddings(const EmbeddingMatrix& matrix);

/// dot(a, b) / (|a| |b|). Throws NotFoundError on unknown ids.
double cosine_similarity(const EmbeddingMatrix& matrix, std::string_view id_a,
                         std::string_view id_b);

}  // namespace embrec
