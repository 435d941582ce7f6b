#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "embrec/metrics.hpp"

namespace embrec {

struct ReportRow {
  std::string label;
  MetricValues values;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double mean_candidates = 0.0;
};

/// One row per method, then the "Random" row.
struct EvalReport {
  std::size_t k = 20;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
};

/// Aligned table, metrics to 4 decimals, followed by the notes.
std::string format_report_text(const EvalReport& report);
/// method,recall@k,precision@k,f1@k,map@k,mrr@k,ndcg@k,evaluated,skipped,mean_candidates
std::string format_report_csv(const EvalReport& report);

void write_report(const EvalReport& report, const std::string& text_path,
                  const std::string& csv_path);

}  // namespace embrec
