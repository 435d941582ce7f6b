#include "embrec/embedding_store.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "embrec/error.hpp"
#include "text_util.hpp"

namespace embrec {
namespace {

constexpr std::string_view kMagic = "EMB1";

double row_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

EmbeddingMatrix parse_binary(std::span<const std::byte> bytes, const std::string& source) {
  detail::ByteReader in(bytes, source);
  in.take_string(kMagic.size(), "magic");
  const std::uint32_t rows = in.take_u32("row count");
  const std::uint64_t dim_offset = in.offset();
  const std::uint32_t dim = in.take_u32("dim");
  if (dim == 0) in.fail_at(dim_offset, "malformed header: dim must be positive");

  // Smallest possible row is a zero-length id plus the vector payload.
  const std::uint64_t min_row_bytes = 2 + 4ull * dim;
  if (static_cast<std::uint64_t>(rows) * min_row_bytes > in.remaining()) {
    in.fail("truncated payload: header declares " + std::to_string(rows) + " rows of dim " +
            std::to_string(dim) + " but only " + std::to_string(in.remaining()) +
            " bytes follow");
  }

  std::vector<std::string> ids;
  std::vector<double> values;
  ids.reserve(rows);
  values.reserve(static_cast<std::size_t>(rows) * dim);
  std::unordered_map<std::string, std::uint64_t> seen;
  for (std::uint32_t r = 0; r < rows; ++r) {
    const std::uint64_t row_offset = in.offset();
    const std::uint16_t id_len = in.take_u16("id length");
    std::string id = in.take_string(id_len, "id bytes");
    if (!seen.emplace(id, row_offset).second) {
      in.fail_at(row_offset, "duplicate item id '" + id + "'");
    }
    double sum_sq = 0.0;
    for (std::uint32_t c = 0; c < dim; ++c) {
      const std::uint64_t value_offset = in.offset();
      const double v = in.take_f32("vector value");
      if (!std::isfinite(v)) {
        in.fail_at(value_offset, "non-finite value in row '" + id + "'");
      }
      sum_sq += v * v;
      values.push_back(v);
    }
    if (sum_sq == 0.0) in.fail_at(row_offset, "zero-norm row '" + id + "'");
    ids.push_back(std::move(id));
  }
  if (!in.at_end()) {
    in.fail(std::to_string(in.remaining()) + " trailing bytes after last row");
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

EmbeddingMatrix parse_text(std::span<const std::byte> bytes, const std::string& source) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw FormatError(source, FormatError::Location::kLine, line, msg);
  };

  auto lines = detail::split_lines(text);
  if (lines.empty()) {
    fail(1, "malformed header: empty file");
  }
  const std::string_view header = lines.front();
  constexpr std::string_view prefix = "id,dim=";
  std::size_t dim = 0;
  if (!header.starts_with(prefix) ||
      !detail::parse_number(header.substr(prefix.size()), dim) || dim == 0) {
    fail(1, "malformed header: expected 'id,dim=<positive integer>'");
  }

  std::vector<std::string> ids;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != dim + 1) {
      fail(line_no, "expected " + std::to_string(dim + 1) + " fields, found " +
                        std::to_string(fields.size()));
    }
    std::string id(fields[0]);
    if (!seen.emplace(id, line_no).second) fail(line_no, "duplicate item id '" + id + "'");
    double sum_sq = 0.0;
    for (std::size_t c = 1; c <= dim; ++c) {
      double v = 0.0;
      if (!detail::parse_number(fields[c], v)) {
        fail(line_no, "cannot parse value '" + std::string(fields[c]) + "'");
      }
      if (!std::isfinite(v)) fail(line_no, "non-finite value in row '" + id + "'");
      sum_sq += v * v;
      values.push_back(v);
    }
    if (sum_sq == 0.0) fail(line_no, "zero-norm row '" + id + "'");
    ids.push_back(std::move(id));
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> item_ids, std::size_t dim,
                                 std::vector<double> values)
    : item_ids_(std::move(item_ids)), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw InvariantError("embedding dim must be positive");
  if (values_.size() != item_ids_.size() * dim_) {
    throw InvariantError("embedding payload has " + std::to_string(values_.size()) +
                         " values, expected " + std::to_string(item_ids_.size() * dim_));
  }
  index_.reserve(item_ids_.size());
  norms_.reserve(item_ids_.size());
  for (std::size_t i = 0; i < item_ids_.size(); ++i) {
    if (!index_.emplace(item_ids_[i], i).second) {
      throw InvariantError("duplicate item id '" + item_ids_[i] + "'");
    }
    const auto r = row(i);
    for (double v : r) {
      if (!std::isfinite(v)) throw InvariantError("non-finite value in row '" + item_ids_[i] + "'");
    }
    const double n = row_norm(r);
    if (n == 0.0) throw InvariantError("zero-norm row '" + item_ids_[i] + "'");
    norms_.push_back(n);
  }
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> item_ids, const Matrix& rows)
    : EmbeddingMatrix(std::move(item_ids), rows.cols(),
                      std::vector<double>(rows.data().begin(), rows.data().end())) {}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view item_id) const {
  const auto it = index_.find(item_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingMatrix::index_of(std::string_view item_id) const {
  const auto idx = find(item_id);
  if (!idx) throw NotFoundError("unknown item id '" + std::string(item_id) + "'");
  return *idx;
}

double EmbeddingMatrix::cosine(std::size_t a, std::size_t b) const {
  const auto ra = row(a);
  const auto rb = row(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) dot += ra[i] * rb[i];
  return dot / (norms_[a] * norms_[b]);
}

EmbeddingMatrix EmbeddingMatrix::rounded_to_float32() const {
  std::vector<double> narrowed(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    narrowed[i] = static_cast<double>(static_cast<float>(values_[i]));
  }
  return EmbeddingMatrix(item_ids_, dim_, std::move(narrowed));
}

EmbeddingMatrix parse_embeddings(std::span<const std::byte> bytes, const std::string& source) {
  const bool has_magic =
      bytes.size() >= kMagic.size() &&
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMagic.size()) == kMagic;
  return has_magic ? parse_binary(bytes, source) : parse_text(bytes, source);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return parse_embeddings(bytes, path);
}

std::vector<std::byte> encode_embeddings(const EmbeddingMatrix& matrix) {
  if (matrix.size() > std::numeric_limits<std::uint32_t>::max() ||
      matrix.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvariantError("embedding matrix too large for EMB1");
  }
  detail::ByteWriter out;
  out.put_bytes(kMagic);
  out.put_u32(static_cast<std::uint32_t>(matrix.size()));
  out.put_u32(static_cast<std::uint32_t>(matrix.dim()));
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    const auto& id = matrix.item_id(i);
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvariantError("item id longer than 65535 bytes");
    }
    out.put_u16(static_cast<std::uint16_t>(id.size()));
    out.put_bytes(id);
    for (double v : matrix.row(i)) out.put_f32(static_cast<float>(v));
  }
  const auto bytes = out.bytes();
  return {bytes.begin(), bytes.end()};
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path) {
  detail::write_file_atomically(path, encode_embeddings(matrix));
}

double cosine_similarity(const EmbeddingMatrix& matrix, std::string_view id_a,
                         std::string_view id_b) {
  return matrix.cosine(matrix.index_of(id_a), matrix.index_of(id_b));
}

}  // namespace embrec
