#pragma once

// Purchase logs, artwork metadata tables, label vocabularies and seeded
// train/validation/test splits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace embrec {

/// One purchase event: every item a user bought together.
struct Transaction {
  std::string user_id;
  std::size_t ordinal = 0;         // per-user purchase index, contiguous from 0
  std::vector<std::string> items;  // sorted, non-empty
};

/// Purchase log in global chronological order.
///
/// Global order is the order in which each (user, ordinal) group first
/// appears in the input; per-user ordinals must follow that order. No item
/// may be bought in two transactions.
class TransactionLog {
 public:
  TransactionLog() = default;
  /// Validates and indexes. Throws InvariantError on ordinal gaps, reused
  /// items or empty transactions.
  explicit TransactionLog(std::vector<Transaction> transactions);

  const std::vector<Transaction>& transactions() const noexcept { return transactions_; }
  std::size_t size() const noexcept { return transactions_.size(); }
  const Transaction& at(std::size_t position) const { return transactions_.at(position); }

  bool has_user(std::string_view user_id) const;
  /// Users in order of first appearance.
  const std::vector<std::string>& users() const noexcept { return users_; }
  /// Global positions of a user's transactions, indexed by ordinal.
  /// Throws NotFoundError for unknown users.
  std::span<const std::size_t> positions_of(std::string_view user_id) const;
  /// Global position of (user, ordinal). Throws NotFoundError if absent.
  std::size_t position_of(std::string_view user_id, std::size_t ordinal) const;
  /// Global position of the transaction that bought `item_id`, if any.
  std::optional<std::size_t> purchase_position(std::string_view item_id) const;

  /// Every purchased item, sorted.
  std::vector<std::string> purchased_items() const;

 private:
  std::vector<Transaction> transactions_;
  std::vector<std::string> users_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> positions_by_user_;
  std::map<std::string, std::size_t, std::less<>> position_by_item_;
};

/// Parses transactions.csv (`user_id,transaction_ordinal,item_id`).
TransactionLog load_transactions(const std::string& path);
TransactionLog parse_transactions(std::string_view csv, const std::string& source);
void save_transactions(const TransactionLog& log, const std::string& path);

enum class AttributeKind { kCategorical, kNumeric };

/// Item metadata keyed by item id. Cells are optional strings; numeric
/// attributes are those whose every present value parses as an integer.
class MetadataTable {
 public:
  struct Row {
    std::string item_id;
    std::vector<std::optional<std::string>> cells;  // one per attribute
  };

  MetadataTable() = default;
  /// Throws InvariantError on duplicate item ids or ragged rows.
  MetadataTable(std::vector<std::string> attributes, std::vector<Row> rows);

  const std::vector<std::string>& attributes() const noexcept { return attributes_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  /// Column index of `attribute`; throws NotFoundError if absent.
  std::size_t column(std::string_view attribute) const;
  bool has_attribute(std::string_view attribute) const;
  AttributeKind kind(std::string_view attribute) const;

  const Row* find(std::string_view item_id) const;
  const std::optional<std::string>& cell(const Row& row, std::string_view attribute) const {
    return row.cells[column(attribute)];
  }
  /// Integer value of a numeric cell, nullopt when missing.
  std::optional<std::int64_t> numeric(const Row& row, std::string_view attribute) const;

  std::vector<std::string> item_ids() const;

 private:
  std::vector<std::string> attributes_;
  std::vector<Row> rows_;
  std::unordered_map<std::string, std::size_t> row_index_;
};

/// Parses metadata.csv (`item_id,<attr1>,...`; empty cell = missing).
MetadataTable load_metadata(const std::string& path);
MetadataTable parse_metadata(std::string_view csv, const std::string& source);
void save_metadata(const MetadataTable& table, const std::string& path);

/// Removes rows whose `attribute` is missing or whose value occurs fewer
/// than `min_count` times.
MetadataTable filter_rare_labels(const MetadataTable& meta, std::string_view attribute,
                                 std::size_t min_count);

/// Removes rows missing any of `required`.
MetadataTable drop_incomplete(const MetadataTable& meta, std::span<const std::string> required);

/// Schema-level cleanup: drops attributes whose missing fraction exceeds
/// `max_missing_fraction`.
MetadataTable drop_sparse_attributes(const MetadataTable& meta, double max_missing_fraction);

struct CleaningRules {
  std::optional<double> max_missing_fraction;  // unset: keep every attribute
  std::vector<std::string> required;           // attributes that must be present
  std::vector<std::string> rare_label_attributes;
  std::size_t min_count = 1;
};

/// Applies, in order: drop_sparse_attributes, drop_incomplete, then
/// filter_rare_labels for each listed attribute.
MetadataTable clean_metadata(const MetadataTable& meta, const CleaningRules& rules);

/// Bijective label <-> index map, labels sorted lexicographically.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  LabelVocabulary(std::string attribute, std::vector<std::string> labels);

  const std::string& attribute() const noexcept { return attribute_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  std::optional<std::size_t> find(std::string_view label) const;
  /// Throws NotFoundError for unknown labels.
  std::size_t index_of(std::string_view label) const;

  friend bool operator==(const LabelVocabulary& a, const LabelVocabulary& b) {
    return a.attribute_ == b.attribute_ && a.labels_ == b.labels_;
  }

 private:
  std::string attribute_;
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

LabelVocabulary build_vocab(const MetadataTable& meta, std::string_view attribute);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

/// Shuffles `items` with `seed` and cuts it into three parts. Validation and
/// test get floor(n * p); train takes the remainder.
DatasetSplit split_items(std::span<const std::string> items,
                         std::array<double, 3> proportions, std::uint64_t seed);

}  // namespace embrec
