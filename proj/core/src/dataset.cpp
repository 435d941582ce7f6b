#include "embrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "embrec/error.hpp"
#include "embrec/random.hpp"
#include "text_util.hpp"

namespace embrec {
namespace {

std::string read_text(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_text(const std::string& path, const std::string& text) {
  detail::write_file_atomically(
      path, std::span(reinterpret_cast<const std::byte*>(text.data()), text.size()));
}

[[noreturn]] void line_error(const std::string& source, std::size_t line, const std::string& msg) {
  throw FormatError(source, FormatError::Location::kLine, line, msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// TransactionLog

TransactionLog::TransactionLog(std::vector<Transaction> transactions)
    : transactions_(std::move(transactions)) {
  for (std::size_t pos = 0; pos < transactions_.size(); ++pos) {
    auto& t = transactions_[pos];
    if (t.items.empty()) {
      throw InvariantError("transaction " + std::to_string(t.ordinal) + " of user '" + t.user_id +
                           "' has no items");
    }
    std::sort(t.items.begin(), t.items.end());
    if (std::adjacent_find(t.items.begin(), t.items.end()) != t.items.end()) {
      throw InvariantError("transaction " + std::to_string(t.ordinal) + " of user '" + t.user_id +
                           "' lists an item twice");
    }
    auto [it, inserted] = positions_by_user_.try_emplace(t.user_id);
    if (inserted) users_.push_back(t.user_id);
    auto& positions = it->second;
    if (t.ordinal != positions.size()) {
      throw InvariantError("non-contiguous transaction ordinal for user '" + t.user_id +
                           "': expected " + std::to_string(positions.size()) + ", found " +
                           std::to_string(t.ordinal));
    }
    positions.push_back(pos);
    for (const auto& item : t.items) {
      const auto [prev, fresh] = position_by_item_.emplace(item, pos);
      if (!fresh) {
        const auto& other = transactions_[prev->second];
        throw InvariantError("unique-artwork violation: item '" + item + "' bought by user '" +
                             other.user_id + "' (transaction " + std::to_string(other.ordinal) +
                             ") and user '" + t.user_id + "' (transaction " +
                             std::to_string(t.ordinal) + ")");
      }
    }
  }
}

bool TransactionLog::has_user(std::string_view user_id) const {
  return positions_by_user_.find(user_id) != positions_by_user_.end();
}

std::span<const std::size_t> TransactionLog::positions_of(std::string_view user_id) const {
  const auto it = positions_by_user_.find(user_id);
  if (it == positions_by_user_.end()) {
    throw NotFoundError("unknown user '" + std::string(user_id) + "'");
  }
  return it->second;
}

std::size_t TransactionLog::position_of(std::string_view user_id, std::size_t ordinal) const {
  const auto positions = positions_of(user_id);
  if (ordinal >= positions.size()) {
    throw NotFoundError("user '" + std::string(user_id) + "' has no transaction " +
                        std::to_string(ordinal));
  }
  return positions[ordinal];
}

std::optional<std::size_t> TransactionLog::purchase_position(std::string_view item_id) const {
  const auto it = position_by_item_.find(item_id);
  if (it == position_by_item_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TransactionLog::purchased_items() const {
  std::vector<std::string> out;
  out.reserve(position_by_item_.size());
  for (const auto& [item, pos] : position_by_item_) out.push_back(item);
  return out;
}

TransactionLog parse_transactions(std::string_view csv, const std::string& source) {
  const auto lines = detail::split_lines(csv);
  if (lines.empty()) line_error(source, 1, "empty file");
  if (lines.front() != "user_id,transaction_ordinal,item_id") {
    line_error(source, 1, "expected header 'user_id,transaction_ordinal,item_id'");
  }

  std::vector<Transaction> groups;
  std::map<std::pair<std::string, std::size_t>, std::size_t> group_index;
  std::map<std::string, std::size_t, std::less<>> item_line;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != 3) {
      line_error(source, line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[2].empty()) {
      line_error(source, line_no, "empty user_id or item_id");
    }
    std::size_t ordinal = 0;
    if (!detail::parse_number(fields[1], ordinal)) {
      line_error(source, line_no, "invalid transaction_ordinal '" + std::string(fields[1]) + "'");
    }
    std::string item(fields[2]);
    if (const auto prev = item_line.find(item); prev != item_line.end()) {
      line_error(source, line_no,
                 "unique-artwork violation: item '" + item + "' already bought on line " +
                     std::to_string(prev->second));
    }
    item_line.emplace(item, line_no);

    auto key = std::make_pair(std::string(fields[0]), ordinal);
    auto [it, inserted] = group_index.try_emplace(key, groups.size());
    if (inserted) {
      groups.push_back(Transaction{key.first, ordinal, {}});
    }
    groups[it->second].items.push_back(std::move(item));
  }
  if (groups.empty()) line_error(source, 1, "empty file: no transactions");

  try {
    return TransactionLog(std::move(groups));
  } catch (const InvariantError& e) {
    throw InvariantError(source + ": " + e.what());
  }
}

TransactionLog load_transactions(const std::string& path) {
  return parse_transactions(read_text(path), path);
}

void save_transactions(const TransactionLog& log, const std::string& path) {
  std::ostringstream out;
  out << "user_id,transaction_ordinal,item_id\n";
  for (const auto& t : log.transactions()) {
    for (const auto& item : t.items) out << t.user_id << ',' << t.ordinal << ',' << item << '\n';
  }
  write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// MetadataTable

MetadataTable::MetadataTable(std::vector<std::string> attributes, std::vector<Row> rows)
    : attributes_(std::move(attributes)), rows_(std::move(rows)) {
  std::set<std::string_view> names;
  for (const auto& a : attributes_) {
    if (a.empty() || a == "item_id" || !names.insert(a).second) {
      throw InvariantError("invalid or duplicate attribute name '" + a + "'");
    }
  }
  row_index_.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].cells.size() != attributes_.size()) {
      throw InvariantError("metadata row '" + rows_[i].item_id + "' has " +
                           std::to_string(rows_[i].cells.size()) + " cells, expected " +
                           std::to_string(attributes_.size()));
    }
    if (!row_index_.emplace(rows_[i].item_id, i).second) {
      throw InvariantError("duplicate metadata item id '" + rows_[i].item_id + "'");
    }
  }
}

std::size_t MetadataTable::column(std::string_view attribute) const {
  const auto it = std::find(attributes_.begin(), attributes_.end(), attribute);
  if (it == attributes_.end()) {
    throw NotFoundError("unknown attribute '" + std::string(attribute) + "'");
  }
  return static_cast<std::size_t>(it - attributes_.begin());
}

bool MetadataTable::has_attribute(std::string_view attribute) const {
  return std::find(attributes_.begin(), attributes_.end(), attribute) != attributes_.end();
}

AttributeKind MetadataTable::kind(std::string_view attribute) const {
  const std::size_t c = column(attribute);
  bool any = false;
  for (const auto& row : rows_) {
    const auto& cell = row.cells[c];
    if (!cell) continue;
    std::int64_t v = 0;
    if (!detail::parse_number(*cell, v)) return AttributeKind::kCategorical;
    any = true;
  }
  return any ? AttributeKind::kNumeric : AttributeKind::kCategorical;
}

const MetadataTable::Row* MetadataTable::find(std::string_view item_id) const {
  const auto it = row_index_.find(std::string(item_id));
  return it == row_index_.end() ? nullptr : &rows_[it->second];
}

std::optional<std::int64_t> MetadataTable::numeric(const Row& row,
                                                   std::string_view attribute) const {
  const auto& value = cell(row, attribute);
  if (!value) return std::nullopt;
  std::int64_t v = 0;
  if (!detail::parse_number(*value, v)) {
    throw InvariantError("attribute '" + std::string(attribute) + "' of item '" + row.item_id +
                         "' is not an integer: '" + *value + "'");
  }
  return v;
}

std::vector<std::string> MetadataTable::item_ids() const {
  std::vector<std::string> ids;
  ids.reserve(rows_.size());
  for (const auto& r : rows_) ids.push_back(r.item_id);
  return ids;
}

MetadataTable parse_metadata(std::string_view csv, const std::string& source) {
  const auto lines = detail::split_lines(csv);
  if (lines.empty()) line_error(source, 1, "empty file");
  const auto header = detail::split(lines.front(), ',');
  if (header.front() != "item_id") line_error(source, 1, "first column must be 'item_id'");
  std::vector<std::string> attributes(header.begin() + 1, header.end());

  std::vector<MetadataTable::Row> rows;
  std::map<std::string, std::size_t, std::less<>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != header.size()) {
      line_error(source, line_no,
                 "expected " + std::to_string(header.size()) + " fields, found " +
                     std::to_string(fields.size()));
    }
    if (fields[0].empty()) line_error(source, line_no, "empty item_id");
    if (!seen.emplace(std::string(fields[0]), line_no).second) {
      line_error(source, line_no, "duplicate item id '" + std::string(fields[0]) + "'");
    }
    MetadataTable::Row row{std::string(fields[0]), {}};
    row.cells.reserve(attributes.size());
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        row.cells.emplace_back(std::nullopt);
      } else {
        row.cells.emplace_back(std::string(fields[c]));
      }
    }
    rows.push_back(std::move(row));
  }
  try {
    return MetadataTable(std::move(attributes), std::move(rows));
  } catch (const InvariantError& e) {
    throw InvariantError(source + ": " + e.what());
  }
}

MetadataTable load_metadata(const std::string& path) {
  return parse_metadata(read_text(path), path);
}

void save_metadata(const MetadataTable& table, const std::string& path) {
  std::ostringstream out;
  out << "item_id";
  for (const auto& a : table.attributes()) out << ',' << a;
  out << '\n';
  for (const auto& row : table.rows()) {
    out << row.item_id;
    for (const auto& cell : row.cells) out << ',' << cell.value_or("");
    out << '\n';
  }
  write_text(path, out.str());
}

MetadataTable filter_rare_labels(const MetadataTable& meta, std::string_view attribute,
                                 std::size_t min_count) {
  if (min_count < 1) throw InvariantError("min_count must be at least 1");
  const std::size_t c = meta.column(attribute);
  std::map<std::string_view, std::size_t> counts;
  for (const auto& row : meta.rows()) {
    if (row.cells[c]) ++counts[*row.cells[c]];
  }
  std::vector<MetadataTable::Row> kept;
  for (const auto& row : meta.rows()) {
    if (row.cells[c] && counts[*row.cells[c]] >= min_count) kept.push_back(row);
  }
  return MetadataTable(meta.attributes(), std::move(kept));
}

MetadataTable drop_incomplete(const MetadataTable& meta, std::span<const std::string> required) {
  std::vector<std::size_t> columns;
  columns.reserve(required.size());
  for (const auto& a : required) columns.push_back(meta.column(a));
  std::vector<MetadataTable::Row> kept;
  for (const auto& row : meta.rows()) {
    const bool complete = std::all_of(columns.begin(), columns.end(),
                                      [&](std::size_t c) { return row.cells[c].has_value(); });
    if (complete) kept.push_back(row);
  }
  return MetadataTable(meta.attributes(), std::move(kept));
}

MetadataTable drop_sparse_attributes(const MetadataTable& meta, double max_missing_fraction) {
  if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
    throw InvariantError("max_missing_fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < meta.attributes().size(); ++c) {
    std::size_t missing = 0;
    for (const auto& row : meta.rows()) missing += row.cells[c] ? 0 : 1;
    const double fraction =
        meta.size() == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(meta.size());
    if (fraction <= max_missing_fraction) keep.push_back(c);
  }
  std::vector<std::string> attributes;
  for (std::size_t c : keep) attributes.push_back(meta.attributes()[c]);
  std::vector<MetadataTable::Row> rows;
  rows.reserve(meta.size());
  for (const auto& row : meta.rows()) {
    MetadataTable::Row r{row.item_id, {}};
    for (std::size_t c : keep) r.cells.push_back(row.cells[c]);
    rows.push_back(std::move(r));
  }
  return MetadataTable(std::move(attributes), std::move(rows));
}

MetadataTable clean_metadata(const MetadataTable& meta, const CleaningRules& rules) {
  MetadataTable out =
      rules.max_missing_fraction ? drop_sparse_attributes(meta, *rules.max_missing_fraction) : meta;
  out = drop_incomplete(out, rules.required);
  for (const auto& attribute : rules.rare_label_attributes) {
    out = filter_rare_labels(out, attribute, rules.min_count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LabelVocabulary

LabelVocabulary::LabelVocabulary(std::string attribute, std::vector<std::string> labels)
    : attribute_(std::move(attribute)), labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw InvariantError("duplicate label '" + labels_[i] + "' in vocabulary '" + attribute_ +
                           "'");
    }
  }
}

std::optional<std::size_t> LabelVocabulary::find(std::string_view label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelVocabulary::index_of(std::string_view label) const {
  const auto idx = find(label);
  if (!idx) {
    throw NotFoundError("label '" + std::string(label) + "' not in vocabulary '" + attribute_ +
                        "'");
  }
  return *idx;
}

LabelVocabulary build_vocab(const MetadataTable& meta, std::string_view attribute) {
  const std::size_t c = meta.column(attribute);
  std::set<std::string> labels;
  for (const auto& row : meta.rows()) {
    if (row.cells[c]) labels.insert(*row.cells[c]);
  }
  if (labels.empty()) {
    throw InvariantError("attribute '" + std::string(attribute) + "' has no values");
  }
  return LabelVocabulary(std::string(attribute),
                         std::vector<std::string>(labels.begin(), labels.end()));
}

// ---------------------------------------------------------------------------
// Splits

DatasetSplit split_items(std::span<const std::string> items, std::array<double, 3> proportions,
                         std::uint64_t seed) {
  if (items.size() < 3) {
    throw InvariantError("need at least 3 items to split, got " + std::to_string(items.size()));
  }
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0)) throw InvariantError("split proportions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvariantError("split proportions must sum to 1");
  {
    std::set<std::string_view> unique(items.begin(), items.end());
    if (unique.size() != items.size()) throw InvariantError("duplicate item ids in split input");
  }

  const auto n = static_cast<double>(items.size());
  // The epsilon keeps exact products such as 10 * 0.7 from flooring down.
  const auto part = [&](double p) { return static_cast<std::size_t>(std::floor(n * p + 1e-9)); };
  const std::size_t n_val = part(proportions[1]);
  const std::size_t n_test = part(proportions[2]);
  const std::size_t n_train = items.size() - n_val - n_test;

  std::vector<std::string> shuffled(items.begin(), items.end());
  Rng rng(seed);
  rng.shuffle(std::span(shuffled));

  DatasetSplit split;
  split.seed = seed;
  const auto begin = shuffled.begin();
  split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                          begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), shuffled.end());
  return split;
}

}  // namespace embrec
