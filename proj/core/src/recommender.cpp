#include "embrec/recommender.hpp"

#include <algorithm>
#include <limits>

namespace embrec {

std::vector<std::string> RecommendationList::ids() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.item_id);
  return out;
}

UserProfile build_profile(const TransactionLog& log, std::string_view user,
                          std::size_t before_ordinal) {
  const auto positions = log.positions_of(user);
  UserProfile profile{std::string(user), {}};
  const std::size_t end = std::min(before_ordinal, positions.size());
  for (std::size_t ordinal = 0; ordinal < end; ++ordinal) {
    const auto& items = log.at(positions[ordinal]).items;
    profile.items.insert(profile.items.end(), items.begin(), items.end());
  }
  return profile;
}

AvailabilityIndex::AvailabilityIndex(const TransactionLog& log,
                                     std::span<const std::string> catalog)
    : log_(&log), catalog_(catalog.begin(), catalog.end()), sold_at_(catalog.size(), kNeverSold) {
  std::size_t found = 0;
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if (const auto pos = log.purchase_position(catalog_[i])) {
      sold_at_[i] = *pos;
      ++found;
    }
  }
  if (found != log.purchased_items().size()) {
    std::vector<std::string> sorted = catalog_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& item : log.purchased_items()) {
      if (!std::binary_search(sorted.begin(), sorted.end(), item)) {
        throw InvariantError("purchased item '" + item + "' is not in the catalog");
      }
    }
    throw InvariantError("catalog contains duplicate item ids");
  }
}

std::vector<std::size_t> AvailabilityIndex::candidates(std::size_t position,
                                                       ExclusionScope scope) const {
  const Transaction& evaluated = log_->at(position);
  const auto user_positions = log_->positions_of(evaluated.user_id);
  const auto is_own_earlier = [&](std::size_t sold) {
    return std::find(user_positions.begin(), user_positions.begin() + evaluated.ordinal, sold) !=
           user_positions.begin() + evaluated.ordinal;
  };

  std::vector<std::size_t> out;
  out.reserve(catalog_.size());
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    const std::size_t sold = sold_at_[i];
    if (sold != kNeverSold && sold < position) {
      if (scope == ExclusionScope::kGlobal || is_own_earlier(sold)) continue;
    }
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> candidate_set(const TransactionLog& log,
                                       std::span<const std::string> catalog,
                                       std::string_view user, std::size_t ordinal,
                                       ExclusionScope scope) {
  const AvailabilityIndex index(log, catalog);
  std::vector<std::string> out;
  for (std::size_t i : index.candidates(log.position_of(user, ordinal), scope)) {
    out.push_back(index.catalog()[i]);
  }
  return out;
}

std::vector<double> score_rows(const EmbeddingMatrix& matrix, std::span<const std::size_t> profile,
                               std::span<const std::size_t> candidates, Aggregation aggregation) {
  if (profile.empty()) throw EmptyProfileError("cannot score candidates against an empty profile");
  std::vector<double> scores(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double acc = aggregation == Aggregation::kMax ? -std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t p : profile) {
      const double sim = matrix.cosine(candidates[c], p);
      acc = aggregation == Aggregation::kMax ? std::max(acc, sim) : acc + sim;
    }
    scores[c] = aggregation == Aggregation::kMax ? acc : acc / static_cast<double>(profile.size());
  }
  return scores;
}

std::vector<ScoredItem> score_candidates(const UserProfile& profile,
                                         std::span<const std::string> candidates,
                                         const EmbeddingMatrix& matrix, Aggregation aggregation) {
  if (profile.items.empty()) {
    throw EmptyProfileError("user '" + profile.user_id + "' has an empty profile");
  }
  std::vector<std::size_t> profile_rows, candidate_rows;
  for (const auto& id : profile.items) profile_rows.push_back(matrix.index_of(id));
  for (const auto& id : candidates) candidate_rows.push_back(matrix.index_of(id));
  const auto scores = score_rows(matrix, profile_rows, candidate_rows, aggregation);
  std::vector<ScoredItem> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({candidates[i], scores[i]});
  return out;
}

RecommendationList top_k(std::span<const ScoredItem> scored, std::size_t k) {
  if (k == 0) throw InvariantError("k must be at least 1");
  std::vector<ScoredItem> ranked(scored.begin(), scored.end());
  const auto better = [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  };
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), better);
  ranked.resize(keep);
  return RecommendationList{std::move(ranked)};
}

}  // namespace embrec
