#pragma once

// Top-K ranking metrics with binary relevance.
//
// All functions take the ranked ids (best first) and the relevant set, and
// only look at the first k ranks. The relevant set must be non-empty.

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace embrec {

using RelevantSet = std::unordered_set<std::string>;

double recall_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k);
/// Denominator is k even when fewer than k items were ranked.
double precision_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                      std::size_t k);
/// Harmonic mean of precision@k and recall@k; 0 when both are 0.
double f1_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k);
/// Reciprocal rank of the first relevant item in the top k, else 0.
double mrr_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k);
/// Sum of precision@r over relevant ranks r <= k, over min(|relevant|, k).
double map_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k);
/// Binary-gain DCG with log2(r + 1) discount, normalized by the ideal DCG.
double ndcg_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k);

struct MetricValues {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double map = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;

  friend bool operator==(const MetricValues&, const MetricValues&) = default;
};

/// All six metrics for one ranked list.
MetricValues evaluate_ranking(std::span<const std::string> ranked, const RelevantSet& relevant,
                              std::size_t k);

struct MetricResult {
  std::size_t k = 0;
  std::vector<MetricValues> per_transaction;
  MetricValues mean;
};

/// Unweighted mean of each metric. Throws InvariantError on an empty list.
MetricResult aggregate(std::vector<MetricValues> per_transaction, std::size_t k);

}  // namespace embrec
