#include "embrec/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"

namespace embrec {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::array<double, 6> as_array(const MetricValues& v) {
  return {v.recall, v.precision, v.f1, v.map, v.mrr, v.ndcg};
}

void write_text(const std::string& path, const std::string& text) {
  detail::write_file_atomically(
      path, std::span(reinterpret_cast<const std::byte*>(text.data()), text.size()));
}

}  // namespace

std::string format_report_text(const EvalReport& report) {
  const std::string k = std::to_string(report.k);
  const std::vector<std::string> metric_headers = {"R@" + k,   "P@" + k,   "F1@" + k,
                                                   "MAP@" + k, "MRR@" + k, "nDCG@" + k};
  std::size_t label_width = 6;
  for (const auto& row : report.rows) label_width = std::max(label_width, row.label.size());

  std::ostringstream out;
  const auto pad_right = [&](const std::string& s, std::size_t w) {
    out << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  const auto pad_left = [&](const std::string& s, std::size_t w) {
    out << std::string(w > s.size() ? w - s.size() : 0, ' ') << s;
  };

  pad_right("Method", label_width);
  for (const auto& h : metric_headers) pad_left(h, 9);
  pad_left("Evaluated", 11);
  pad_left("Skipped", 9);
  pad_left("Candidates", 12);
  out << '\n';
  out << std::string(label_width + 9 * 6 + 11 + 9 + 12, '-') << '\n';

  for (const auto& row : report.rows) {
    pad_right(row.label, label_width);
    for (double v : as_array(row.values)) pad_left(row.evaluated ? fixed(v, 4) : "n/a", 9);
    pad_left(std::to_string(row.evaluated), 11);
    pad_left(std::to_string(row.skipped), 9);
    pad_left(fixed(row.mean_candidates, 1), 12);
    out << '\n';
  }
  if (!report.notes.empty()) {
    out << '\n';
    for (const auto& note : report.notes) out << "* " << note << '\n';
  }
  return out.str();
}

std::string format_report_csv(const EvalReport& report) {
  const std::string k = std::to_string(report.k);
  std::ostringstream out;
  out << "method,recall@" << k << ",precision@" << k << ",f1@" << k << ",map@" << k << ",mrr@"
      << k << ",ndcg@" << k << ",evaluated,skipped,mean_candidates\n";
  for (const auto& row : report.rows) {
    out << row.label;
    for (double v : as_array(row.values)) out << ',' << shortest(v);
    out << ',' << row.evaluated << ',' << row.skipped << ',' << shortest(row.mean_candidates)
        << '\n';
  }
  return out.str();
}

void write_report(const EvalReport& report, const std::string& text_path,
                  const std::string& csv_path) {
  if (!text_path.empty()) write_text(text_path, format_report_text(report));
  if (!csv_path.empty()) write_text(csv_path, format_report_csv(report));
}

}  // namespace embrec
