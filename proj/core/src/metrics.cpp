#include "embrec/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "embrec/error.hpp"

namespace embrec {
namespace {

void check(const RelevantSet& relevant, std::size_t k) {
  if (relevant.empty()) throw InvariantError("relevant set is empty");
  if (k == 0) throw InvariantError("k must be at least 1");
}

std::size_t cutoff(std::span<const std::string> ranked, std::size_t k) {
  return std::min(k, ranked.size());
}

std::size_t hits(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < cutoff(ranked, k); ++r) n += relevant.contains(ranked[r]) ? 1 : 0;
  return n;
}

}  // namespace

double recall_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                   std::size_t k) {
  check(relevant, k);
  return static_cast<double>(hits(ranked, relevant, k)) / static_cast<double>(relevant.size());
}

double precision_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                      std::size_t k) {
  check(relevant, k);
  return static_cast<double>(hits(ranked, relevant, k)) / static_cast<double>(k);
}

double f1_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  const double p = precision_at_k(ranked, relevant, k);
  const double r = recall_at_k(ranked, relevant, k);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double mrr_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  check(relevant, k);
  for (std::size_t r = 0; r < cutoff(ranked, k); ++r) {
    if (relevant.contains(ranked[r])) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

double map_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  check(relevant, k);
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t r = 0; r < cutoff(ranked, k); ++r) {
    if (relevant.contains(ranked[r])) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(std::min(relevant.size(), k));
}

double ndcg_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                 std::size_t k) {
  check(relevant, k);
  double dcg = 0.0;
  for (std::size_t r = 0; r < cutoff(ranked, k); ++r) {
    if (relevant.contains(ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(relevant.size(), k); ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  return dcg / ideal;
}

MetricValues evaluate_ranking(std::span<const std::string> ranked, const RelevantSet& relevant,
                              std::size_t k) {
  MetricValues v;
  v.recall = recall_at_k(ranked, relevant, k);
  v.precision = precision_at_k(ranked, relevant, k);
  v.f1 = v.precision + v.recall == 0.0
             ? 0.0
             : 2.0 * v.precision * v.recall / (v.precision + v.recall);
  v.map = map_at_k(ranked, relevant, k);
  v.mrr = mrr_at_k(ranked, relevant, k);
  v.ndcg = ndcg_at_k(ranked, relevant, k);
  return v;
}

MetricResult aggregate(std::vector<MetricValues> per_transaction, std::size_t k) {
  if (per_transaction.empty()) throw InvariantError("cannot aggregate zero transactions");
  MetricResult result;
  result.k = k;
  for (const auto& v : per_transaction) {
    result.mean.recall += v.recall;
    result.mean.precision += v.precision;
    result.mean.f1 += v.f1;
    result.mean.map += v.map;
    result.mean.mrr += v.mrr;
    result.mean.ndcg += v.ndcg;
  }
  const auto n = static_cast<double>(per_transaction.size());
  result.mean.recall /= n;
  result.mean.precision /= n;
  result.mean.f1 /= n;
  result.mean.map /= n;
  result.mean.mrr /= n;
  result.mean.ndcg /= n;
  result.per_transaction = std::move(per_transaction);
  return result;
}

}  // namespace embrec
