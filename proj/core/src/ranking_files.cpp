#include <map>
#include <set>

#include "binary_io.hpp"
#include "embrec/error.hpp"
#include "embrec/harness.hpp"
#include "text_util.hpp"

namespace embrec {
namespace {

[[noreturn]] void line_error(const std::string& source, std::size_t line, const std::string& msg) {
  throw FormatError(source, FormatError::Location::kLine, line, msg);
}

std::string read_text(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace

RankingFileScore score_ranking_csv(std::string_view recs_csv, std::string_view truth_csv,
                                   std::size_t k, const std::string& recs_source,
                                   const std::string& truth_source) {
  if (k == 0) throw InvariantError("k must be at least 1");

  std::map<std::string, std::map<std::size_t, std::string>> recs;
  std::map<std::string, std::set<std::string>> rec_items;
  const auto rec_lines = detail::split_lines(recs_csv);
  if (rec_lines.empty() || rec_lines.front() != "query_id,rank,item_id") {
    line_error(recs_source, 1, "expected header 'query_id,rank,item_id'");
  }
  for (std::size_t i = 1; i < rec_lines.size(); ++i) {
    if (rec_lines[i].empty()) continue;
    const auto f = detail::split(rec_lines[i], ',');
    std::size_t rank = 0;
    if (f.size() != 3 || f[0].empty() || f[2].empty() || !detail::parse_number(f[1], rank) ||
        rank == 0) {
      line_error(recs_source, i + 1, "expected 'query_id,rank>=1,item_id'");
    }
    const std::string query(f[0]);
    if (!recs[query].emplace(rank, std::string(f[2])).second) {
      line_error(recs_source, i + 1, "duplicate rank " + std::to_string(rank));
    }
    if (!rec_items[query].insert(std::string(f[2])).second) {
      line_error(recs_source, i + 1, "item '" + std::string(f[2]) + "' ranked twice");
    }
  }

  std::map<std::string, RelevantSet> truth;
  const auto truth_lines = detail::split_lines(truth_csv);
  if (truth_lines.empty() || truth_lines.front() != "query_id,item_id") {
    line_error(truth_source, 1, "expected header 'query_id,item_id'");
  }
  for (std::size_t i = 1; i < truth_lines.size(); ++i) {
    if (truth_lines[i].empty()) continue;
    const auto f = detail::split(truth_lines[i], ',');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      line_error(truth_source, i + 1, "expected 'query_id,item_id'");
    }
    truth[std::string(f[0])].insert(std::string(f[1]));
  }
  if (truth.empty()) throw InvariantError(truth_source + ": no ground truth rows");

  RankingFileScore score;
  std::vector<MetricValues> values;
  for (const auto& [query, relevant] : truth) {
    std::vector<std::string> ranked;
    if (const auto it = recs.find(query); it != recs.end()) {
      for (const auto& [rank, item] : it->second) ranked.push_back(item);
    } else {
      ++score.queries_without_recs;
    }
    values.push_back(evaluate_ranking(ranked, relevant, k));
  }
  for (const auto& [query, list] : recs) {
    if (!truth.contains(query)) ++score.queries_without_truth;
  }
  score.queries = values.size();
  score.metrics = aggregate(std::move(values), k);
  return score;
}

RankingFileScore score_ranking_files(const std::string& recs_path, const std::string& truth_path,
                                     std::size_t k) {
  return score_ranking_csv(read_text(recs_path), read_text(truth_path), k, recs_path, truth_path);
}

}  // namespace embrec
