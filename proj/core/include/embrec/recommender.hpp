#pragma once

// Content-based ranking: a user's profile is the set of items bought in
// earlier transactions; candidates are scored by cosine similarity to the
// profile items.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embrec/dataset.hpp"
#include "embrec/embedding_store.hpp"
#include "embrec/error.hpp"

namespace embrec {

enum class Aggregation { kMax, kMean };

/// Which sold items leave the candidate pool.
enum class ExclusionScope {
  kGlobal,    // anything sold by anyone before the evaluated transaction
  kUserOnly,  // only the evaluating user's own earlier purchases
};

struct UserProfile {
  std::string user_id;
  std::vector<std::string> items;  // chronological, then by id within a transaction
};

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

/// Ranked by descending score, ties by ascending item id.
struct RecommendationList {
  std::vector<ScoredItem> items;

  std::size_t size() const noexcept { return items.size(); }
  std::vector<std::string> ids() const;
};

/// Raised when scoring is attempted with nobody to compare against.
class EmptyProfileError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// Items from `user`'s transactions with ordinal < before_ordinal.
/// Throws NotFoundError for unknown users.
UserProfile build_profile(const TransactionLog& log, std::string_view user,
                          std::size_t before_ordinal);

/// Precomputed sale positions of every catalog item, for fast
/// candidate-set queries during replay.
class AvailabilityIndex {
 public:
  static constexpr std::size_t kNeverSold = static_cast<std::size_t>(-1);

  /// `log` must outlive the index. Throws InvariantError if a purchased item
  /// is missing from the catalog.
  AvailabilityIndex(const TransactionLog& log, std::span<const std::string> catalog);

  const std::vector<std::string>& catalog() const noexcept { return catalog_; }
  /// Global transaction position at which catalog item `i` was sold.
  std::size_t sold_at(std::size_t i) const { return sold_at_[i]; }

  /// Catalog indices still available when the transaction at global
  /// `position` (made by `user`) happens. The transaction's own items stay.
  std::vector<std::size_t> candidates(std::size_t position, ExclusionScope scope) const;

 private:
  const TransactionLog* log_;
  std::vector<std::string> catalog_;
  std::vector<std::size_t> sold_at_;
};

/// Catalog minus items sold before (user, ordinal) and minus the user's own
/// profile. Returned in catalog order.
std::vector<std::string> candidate_set(const TransactionLog& log,
                                       std::span<const std::string> catalog,
                                       std::string_view user, std::size_t ordinal,
                                       ExclusionScope scope = ExclusionScope::kGlobal);

/// score(c) = aggregate over profile items p of cosine(c, p).
/// Throws EmptyProfileError when the profile is empty.
std::vector<ScoredItem> score_candidates(const UserProfile& profile,
                                         std::span<const std::string> candidates,
                                         const EmbeddingMatrix& matrix,
                                         Aggregation aggregation = Aggregation::kMax);

/// Row-index variant used by the evaluation harness.
std::vector<double> score_rows(const EmbeddingMatrix& matrix, std::span<const std::size_t> profile,
                               std::span<const std::size_t> candidates, Aggregation aggregation);

/// The k best items; fewer if fewer were scored. Throws InvariantError if k == 0.
RecommendationList top_k(std::span<const ScoredItem> scored, std::size_t k);

}  // namespace embrec
