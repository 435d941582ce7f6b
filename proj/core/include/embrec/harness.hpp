#pragma once

// Chronological replay evaluation of embedding files, the random baseline,
// the shallow fine-tuning flow, and whole experiments.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embrec/dataset.hpp"
#include "embrec/embedding_store.hpp"
#include "embrec/experiment_config.hpp"
#include "embrec/metrics.hpp"
#include "embrec/multitask_head.hpp"
#include "embrec/recommender.hpp"
#include "embrec/report.hpp"

namespace embrec {

struct EvaluationSettings {
  std::size_t k = 20;
  Aggregation aggregation = Aggregation::kMax;
  ExclusionScope exclusion = ExclusionScope::kGlobal;
  std::size_t evaluation_start = 0;
  std::size_t threads = 1;
  bool keep_trace = false;
};

/// What happened for one evaluated transaction.
struct TransactionTrace {
  std::size_t position = 0;
  std::string user_id;
  std::size_t ordinal = 0;
  std::vector<std::string> profile;
  std::vector<std::string> candidates;  // catalog order
  std::vector<std::string> recommended;
  MetricValues values;
};

struct MethodEvaluation {
  std::string label;
  MetricResult metrics;           // mean is all zeros when nothing was evaluated
  std::size_t evaluated = 0;      // transactions scored
  std::size_t skipped = 0;        // in-window transactions with an empty profile
  double mean_candidates = 0.0;
  std::vector<TransactionTrace> trace;  // filled when keep_trace is set
};

/// Transactions in the evaluation window (position >= evaluation_start) with
/// a non-empty profile, in global order.
std::vector<std::size_t> evaluated_positions(const TransactionLog& log,
                                             std::size_t evaluation_start);

/// Replays the log: for every evaluated transaction, profile = earlier
/// purchases of the user, candidates = available catalog items, relevant =
/// the transaction's items. Throws NotFoundError if a transacted or catalog
/// item lacks an embedding.
MethodEvaluation replay_evaluate(const TransactionLog& log, const EmbeddingMatrix& embeddings,
                                 std::span<const std::string> catalog,
                                 const EvaluationSettings& settings);

/// K uniform draws without replacement from each transaction's candidate
/// set, metrics averaged over `trials`.
MethodEvaluation random_baseline(const TransactionLog& log, std::span<const std::string> catalog,
                                 const EvaluationSettings& settings, std::uint64_t seed,
                                 std::size_t trials);

struct FineTuneOutcome {
  std::string label;
  MultitaskModel model;
  TrainResult training;
  DatasetSplit split;
  std::vector<TaskSpec> tasks;
  EmbeddingMatrix embeddings;  // shared-layer activations of every base item, float32-rounded
};

/// Shallow fine-tuning over precomputed features. Labels come from `metadata`
/// after cleaning; when `allowed_items` is non-null only those items supply
/// labels. Every item of `base` is then embedded with the trained shared
/// layer.
FineTuneOutcome shallow_finetune(const EmbeddingMatrix& base, const MetadataTable& metadata,
                                 const FineTuneConfig& config,
                                 const std::vector<std::string>* allowed_items = nullptr);

/// File-driven fine-tuning: loads inputs, trains, writes the configured
/// export/checkpoint/history files. `log` is needed for the temporal mode.
FineTuneOutcome run_finetune(const FineTuneConfig& config, const TransactionLog* log,
                             std::size_t evaluation_start);

struct RankingFileScore {
  MetricResult metrics;
  std::size_t queries = 0;               // queries with ground truth (scored)
  std::size_t queries_without_recs = 0;  // scored as an empty list
  std::size_t queries_without_truth = 0; // ignored
};

/// Scores recommendation lists against ground truth.
/// recs: `query_id,rank,item_id` (rank from 1); truth: `query_id,item_id`.
RankingFileScore score_ranking_csv(std::string_view recs_csv, std::string_view truth_csv,
                                   std::size_t k, const std::string& recs_source = "<recs>",
                                   const std::string& truth_source = "<truth>");
RankingFileScore score_ranking_files(const std::string& recs_path, const std::string& truth_path,
                                     std::size_t k);

/// Evaluates every configured method, the fine-tuned embedding (if any) and
/// the random baseline; writes the configured report files.
EvalReport run_experiment(const ExperimentConfig& config);

}  // namespace embrec
