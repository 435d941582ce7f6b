#pragma once

// Independent reference implementations used only by tests. These are
// deliberately naive (full scans, explicit loops, std::set algebra) and
// share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "embrec/dataset.hpp"
#include "embrec/embedding_store.hpp"
#include "embrec/multitask_head.hpp"

namespace oracle {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// --- ranking metrics -------------------------------------------------------

inline std::size_t hit_count(const std::vector<std::string>& ranked,
                             const std::set<std::string>& relevant, std::size_t k) {
  std::set<std::string> top(ranked.begin(), ranked.begin() + std::min(k, ranked.size()));
  std::vector<std::string> both;
  std::set_intersection(top.begin(), top.end(), relevant.begin(), relevant.end(),
                        std::back_inserter(both));
  return both.size();
}

inline double recall(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                     std::size_t k) {
  return static_cast<double>(hit_count(ranked, rel, k)) / static_cast<double>(rel.size());
}

inline double precision(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                        std::size_t k) {
  return static_cast<double>(hit_count(ranked, rel, k)) / static_cast<double>(k);
}

inline double mrr(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                  std::size_t k) {
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    if (rel.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

inline double average_precision(const std::vector<std::string>& ranked,
                                 const std::set<std::string>& rel, std::size_t k) {
  double sum = 0.0;
  for (std::size_t r = 1; r <= std::min(k, ranked.size()); ++r) {
    if (!rel.count(ranked[r - 1])) continue;
    // precision@r recomputed from scratch
    std::vector<std::string> prefix(ranked.begin(), ranked.begin() + r);
    sum += precision(prefix, rel, r);
  }
  return sum / static_cast<double>(std::min(rel.size(), k));
}

inline double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                   std::size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 1; r <= k; ++r) {
    if (r <= ranked.size() && rel.count(ranked[r - 1])) dcg += 1.0 / std::log2(r + 1.0);
    if (r <= rel.size()) idcg += 1.0 / std::log2(r + 1.0);
  }
  return dcg / idcg;
}

// --- multitask head --------------------------------------------------------

struct ScalarForward {
  std::vector<std::vector<double>> shared;
  std::vector<std::vector<std::vector<double>>> outputs;  // task, sample, unit
};

inline ScalarForward forward(const embrec::MultitaskModel& model, const embrec::Matrix& x) {
  const auto& p = model.parameters();
  ScalarForward out;
  out.outputs.resize(p.heads.size());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    std::vector<double> s(p.shared.outputs);
    for (std::size_t j = 0; j < p.shared.outputs; ++j) {
      double z = p.shared.bias[j];
      for (std::size_t i = 0; i < p.shared.inputs; ++i) z += p.shared.w(j, i) * x(n, i);
      s[j] = z > 0 ? z : 0;
    }
    for (std::size_t k = 0; k < p.heads.size(); ++k) {
      const auto& h = p.heads[k];
      std::vector<double> z(h.outputs);
      for (std::size_t c = 0; c < h.outputs; ++c) {
        z[c] = h.bias[c];
        for (std::size_t j = 0; j < h.inputs; ++j) z[c] += h.w(c, j) * s[j];
      }
      if (model.tasks()[k].kind == embrec::TaskKind::kClassification) {
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double sum = 0;
        for (double& v : z) sum += (v = std::exp(v - mx));
        for (double& v : z) v /= sum;
      }
      out.outputs[k].push_back(z);
    }
    out.shared.push_back(s);
  }
  return out;
}

inline double total_loss(const embrec::MultitaskModel& model, const embrec::Matrix& x,
                         const std::vector<embrec::TargetColumn>& targets) {
  const auto f = oracle::forward(model, x);
  double total = 0.0;
  for (std::size_t k = 0; k < model.tasks().size(); ++k) {
    double sum = 0.0;
    for (std::size_t n = 0; n < x.rows(); ++n) {
      if (model.tasks()[k].kind == embrec::TaskKind::kClassification) {
        const auto t = std::get<std::vector<std::size_t>>(targets[k])[n];
        sum += -std::log(std::max(f.outputs[k][n][t], 1e-12));
      } else {
        sum += std::fabs(f.outputs[k][n][0] - std::get<std::vector<double>>(targets[k])[n]);
      }
    }
    total += model.tasks()[k].weight * sum / static_cast<double>(x.rows());
  }
  return total;
}

/// Central finite differences of total_loss w.r.t. every parameter, in
/// block declaration order.
inline std::vector<double> numeric_gradient(const embrec::MultitaskModel& model,
                                            const embrec::Matrix& x,
                                            const std::vector<embrec::TargetColumn>& targets,
                                            double h) {
  std::vector<double> grads;
  embrec::MultitaskModel probe = model;
  std::vector<std::span<double>> blocks;
  probe.mutable_parameters().for_each_block(
      [&](const std::string&, std::span<double> b) { blocks.push_back(b); });
  for (auto block : blocks) {
    for (double& v : block) {
      const double saved = v;
      v = saved + h;
      const double up = total_loss(probe, x, targets);
      v = saved - h;
      const double down = total_loss(probe, x, targets);
      v = saved;
      grads.push_back((up - down) / (2 * h));
    }
  }
  return grads;
}

inline std::vector<double> flatten(const embrec::Parameters& p) {
  std::vector<double> out;
  p.for_each_block([&](const std::string&, std::span<const double> b) {
    out.insert(out.end(), b.begin(), b.end());
  });
  return out;
}

// --- replay ----------------------------------------------------------------

struct ReplayStep {
  std::string user;
  std::size_t ordinal;
  std::vector<std::string> profile;         // sorted
  std::vector<std::string> candidates;      // sorted
  std::vector<std::string> relevant;        // sorted
};

struct ReplayOutcome {
  std::vector<ReplayStep> steps;
  std::size_t skipped = 0;
};

/// Walks the transactions in order, tracking a global sold set and each
/// user's purchase history.
inline ReplayOutcome replay(const std::vector<embrec::Transaction>& transactions,
                            const std::vector<std::string>& catalog, bool global_exclusion) {
  ReplayOutcome out;
  std::set<std::string> sold;
  std::map<std::string, std::set<std::string>> history;
  for (const auto& t : transactions) {
    auto& mine = history[t.user_id];
    if (mine.empty()) {
      ++out.skipped;
    } else {
      ReplayStep step{t.user_id, t.ordinal, {mine.begin(), mine.end()}, {}, {}};
      for (const auto& item : catalog) {
        if (mine.count(item)) continue;
        if (global_exclusion && sold.count(item)) continue;
        step.candidates.push_back(item);
      }
      std::sort(step.candidates.begin(), step.candidates.end());
      step.relevant = t.items;
      std::sort(step.relevant.begin(), step.relevant.end());
      out.steps.push_back(std::move(step));
    }
    for (const auto& item : t.items) {
      sold.insert(item);
      mine.insert(item);
    }
  }
  return out;
}

// --- end-to-end pipeline ---------------------------------------------------

struct PipelineRow {
  double recall, precision, f1, map, mrr, ndcg;
};

struct PipelineOutcome {
  std::vector<PipelineRow> rows;
  std::vector<std::vector<std::string>> recommended;
  std::size_t skipped = 0;
};

/// Replay, brute-force max/mean cosine scoring, full sort, then the metric
/// oracles. Only uses the embedding matrix as a row lookup.
inline PipelineOutcome pipeline(const std::vector<embrec::Transaction>& transactions,
                                const std::vector<std::string>& catalog,
                                const embrec::EmbeddingMatrix& emb, std::size_t k,
                                bool use_max, bool global_exclusion) {
  const auto vec = [&](const std::string& id) {
    const auto r = emb.row(id);
    return std::vector<double>(r.begin(), r.end());
  };
  const auto steps = replay(transactions, catalog, global_exclusion);
  PipelineOutcome out;
  out.skipped = steps.skipped;
  for (const auto& step : steps.steps) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& c : step.candidates) {
      double agg = use_max ? -2.0 : 0.0;
      for (const auto& p : step.profile) {
        const double s = cosine(vec(c), vec(p));
        agg = use_max ? std::max(agg, s) : agg + s;
      }
      if (!use_max) agg /= static_cast<double>(step.profile.size());
      scored.emplace_back(-agg, c);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> ranked;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) ranked.push_back(scored[i].second);
    const std::set<std::string> rel(step.relevant.begin(), step.relevant.end());
    PipelineRow row{recall(ranked, rel, k), precision(ranked, rel, k), 0.0,
                    average_precision(ranked, rel, k), mrr(ranked, rel, k), ndcg(ranked, rel, k)};
    if (row.recall + row.precision > 0) {
      row.f1 = 2 * row.recall * row.precision / (row.recall + row.precision);
    }
    out.rows.push_back(row);
    out.recommended.push_back(std::move(ranked));
  }
  return out;
}

}  // namespace oracle
