#include "embrec/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <thread>

#include "embrec/error.hpp"
#include "embrec/random.hpp"

namespace embrec {
namespace {

/// Runs fn(i) for i in [0, n) across `threads` workers. Each index writes
/// only its own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void require_embeddings(const EmbeddingMatrix& embeddings, const std::vector<std::string>& ids,
                        const char* what) {
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    if (!embeddings.contains(id)) missing.push_back(id);
  }
  if (missing.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i) {
    list += (i ? ", " : "") + missing[i];
  }
  throw NotFoundError("missing embeddings for " + std::to_string(missing.size()) + " " + what +
                      " items (" + list + (missing.size() > 5 ? ", ..." : "") + ")");
}

std::size_t count_skipped(const TransactionLog& log, std::size_t evaluation_start) {
  std::size_t skipped = 0;
  for (std::size_t pos = evaluation_start; pos < log.size(); ++pos) {
    skipped += log.at(pos).ordinal == 0 ? 1 : 0;
  }
  return skipped;
}

MethodEvaluation finish(std::string label, std::vector<MetricValues> values,
                        const std::vector<std::size_t>& candidate_counts, std::size_t k,
                        std::size_t skipped) {
  MethodEvaluation eval;
  eval.label = std::move(label);
  eval.evaluated = values.size();
  eval.skipped = skipped;
  if (!values.empty()) {
    eval.metrics = aggregate(std::move(values), k);
    double total = 0.0;
    for (std::size_t c : candidate_counts) total += static_cast<double>(c);
    eval.mean_candidates = total / static_cast<double>(candidate_counts.size());
  } else {
    eval.metrics.k = k;
  }
  return eval;
}

RelevantSet relevant_of(const Transaction& t) { return RelevantSet(t.items.begin(), t.items.end()); }

ReportRow to_row(const MethodEvaluation& eval) {
  return {eval.label, eval.metrics.mean, eval.evaluated, eval.skipped, eval.mean_candidates};
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> evaluated_positions(const TransactionLog& log,
                                             std::size_t evaluation_start) {
  std::vector<std::size_t> out;
  for (std::size_t pos = evaluation_start; pos < log.size(); ++pos) {
    if (log.at(pos).ordinal > 0) out.push_back(pos);
  }
  return out;
}

MethodEvaluation replay_evaluate(const TransactionLog& log, const EmbeddingMatrix& embeddings,
                                 std::span<const std::string> catalog,
                                 const EvaluationSettings& settings) {
  if (settings.k == 0) throw InvariantError("k must be at least 1");
  require_embeddings(embeddings, log.purchased_items(), "transacted");
  require_embeddings(embeddings, std::vector<std::string>(catalog.begin(), catalog.end()),
                     "catalog");

  const AvailabilityIndex index(log, catalog);
  std::vector<std::size_t> catalog_rows(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) catalog_rows[i] = embeddings.index_of(catalog[i]);

  const auto positions = evaluated_positions(log, settings.evaluation_start);
  std::vector<MetricValues> values(positions.size());
  std::vector<std::size_t> candidate_counts(positions.size());
  std::vector<TransactionTrace> traces(settings.keep_trace ? positions.size() : 0);

  parallel_for(positions.size(), settings.threads, [&](std::size_t slot) {
    const std::size_t pos = positions[slot];
    const Transaction& t = log.at(pos);
    const UserProfile profile = build_profile(log, t.user_id, t.ordinal);
    std::vector<std::size_t> profile_rows;
    profile_rows.reserve(profile.items.size());
    for (const auto& id : profile.items) profile_rows.push_back(embeddings.index_of(id));

    const auto candidates = index.candidates(pos, settings.exclusion);
    std::vector<std::size_t> candidate_rows(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      candidate_rows[c] = catalog_rows[candidates[c]];
    }
    const auto scores = score_rows(embeddings, profile_rows, candidate_rows, settings.aggregation);
    std::vector<ScoredItem> scored(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      scored[c] = {catalog[candidates[c]], scores[c]};
    }
    const auto ranked = top_k(scored, settings.k).ids();
    values[slot] = evaluate_ranking(ranked, relevant_of(t), settings.k);
    candidate_counts[slot] = candidates.size();

    if (settings.keep_trace) {
      auto& trace = traces[slot];
      trace.position = pos;
      trace.user_id = t.user_id;
      trace.ordinal = t.ordinal;
      trace.profile = profile.items;
      for (std::size_t c : candidates) trace.candidates.push_back(catalog[c]);
      trace.recommended = ranked;
      trace.values = values[slot];
    }
  });

  auto eval = finish("", std::move(values), candidate_counts, settings.k,
                     count_skipped(log, settings.evaluation_start));
  eval.trace = std::move(traces);
  return eval;
}

MethodEvaluation random_baseline(const TransactionLog& log, std::span<const std::string> catalog,
                                 const EvaluationSettings& settings, std::uint64_t seed,
                                 std::size_t trials) {
  if (settings.k == 0) throw InvariantError("k must be at least 1");
  if (trials == 0) throw InvariantError("random baseline needs at least one trial");
  const AvailabilityIndex index(log, catalog);
  const auto positions = evaluated_positions(log, settings.evaluation_start);
  std::vector<MetricValues> values(positions.size());
  std::vector<std::size_t> candidate_counts(positions.size());

  parallel_for(positions.size(), settings.threads, [&](std::size_t slot) {
    const std::size_t pos = positions[slot];
    const Transaction& t = log.at(pos);
    const RelevantSet relevant = relevant_of(t);
    const auto candidates = index.candidates(pos, settings.exclusion);
    const std::size_t draws = std::min(settings.k, candidates.size());
    Rng rng(mix_seed(seed, pos));
    std::vector<std::size_t> pool;
    std::vector<std::string> ranked(draws);
    MetricValues sum;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      pool = candidates;
      // Partial Fisher-Yates: the first `draws` slots become the sample.
      for (std::size_t i = 0; i < draws; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
        std::swap(pool[i], pool[j]);
        ranked[i] = catalog[pool[i]];
      }
      const auto v = evaluate_ranking(ranked, relevant, settings.k);
      sum.recall += v.recall;
      sum.precision += v.precision;
      sum.f1 += v.f1;
      sum.map += v.map;
      sum.mrr += v.mrr;
      sum.ndcg += v.ndcg;
    }
    const auto n = static_cast<double>(trials);
    values[slot] = {sum.recall / n, sum.precision / n, sum.f1 / n,
                    sum.map / n,    sum.mrr / n,       sum.ndcg / n};
    candidate_counts[slot] = candidates.size();
  });

  return finish("Random", std::move(values), candidate_counts, settings.k,
                count_skipped(log, settings.evaluation_start));
}

// ---------------------------------------------------------------------------
// Fine-tuning

FineTuneOutcome shallow_finetune(const EmbeddingMatrix& base, const MetadataTable& metadata,
                                 const FineTuneConfig& config,
                                 const std::vector<std::string>* allowed_items) {
  if (config.tasks.empty()) throw InvariantError("fine-tuning needs at least one task");

  CleaningRules rules;
  rules.max_missing_fraction = config.max_missing_fraction;
  rules.min_count = config.min_count;
  for (const auto& task : config.tasks) {
    if (!metadata.has_attribute(task.attribute)) {
      throw NotFoundError("metadata has no attribute '" + task.attribute + "'");
    }
    rules.required.push_back(task.attribute);
    if (task.kind == TaskKind::kClassification) rules.rare_label_attributes.push_back(task.attribute);
  }
  if (config.max_missing_fraction) {
    const auto kept = drop_sparse_attributes(metadata, *config.max_missing_fraction);
    for (const auto& task : config.tasks) {
      if (!kept.has_attribute(task.attribute)) {
        throw InvariantError("task attribute '" + task.attribute +
                             "' is dropped as mostly empty by max_missing_fraction");
      }
    }
  }
  const MetadataTable cleaned = clean_metadata(metadata, rules);

  std::set<std::string, std::less<>> allowed;
  if (allowed_items) allowed.insert(allowed_items->begin(), allowed_items->end());
  std::vector<std::string> items;
  for (const auto& row : cleaned.rows()) {
    if (!base.contains(row.item_id)) continue;
    if (allowed_items && !allowed.contains(row.item_id)) continue;
    items.push_back(row.item_id);
  }
  if (items.size() < 3) {
    throw InvariantError("only " + std::to_string(items.size()) +
                         " labeled items with embeddings remain after cleaning");
  }
  const DatasetSplit split = split_items(items, config.split, config.split_seed);
  if (split.validation.empty()) throw InvariantError("validation split is empty");

  std::vector<TaskSpec> tasks;
  std::vector<Standardization> scalers(config.tasks.size());
  for (std::size_t k = 0; k < config.tasks.size(); ++k) {
    const auto& task = config.tasks[k];
    if (task.kind == TaskKind::kClassification) {
      std::set<std::string> labels;
      for (const auto& id : items) labels.insert(*cleaned.cell(*cleaned.find(id), task.attribute));
      if (labels.size() < 2) {
        throw InvariantError("task '" + task.attribute + "' has fewer than two labels");
      }
      tasks.push_back(TaskSpec::classification(
          LabelVocabulary(task.attribute, std::vector<std::string>(labels.begin(), labels.end())),
          task.weight));
    } else {
      if (cleaned.kind(task.attribute) != AttributeKind::kNumeric) {
        throw InvariantError("regression attribute '" + task.attribute + "' is not numeric");
      }
      std::vector<double> train_values;
      for (const auto& id : split.train) {
        train_values.push_back(
            static_cast<double>(*cleaned.numeric(*cleaned.find(id), task.attribute)));
      }
      scalers[k] = Standardization::fit(train_values);
      tasks.push_back(TaskSpec::regression(task.attribute, task.weight));
    }
  }

  const auto make_set = [&](const std::vector<std::string>& ids) {
    LabeledSet set;
    set.features = Matrix(ids.size(), base.dim());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto src = base.row(ids[r]);
      std::copy(src.begin(), src.end(), set.features.row(r).begin());
    }
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      if (tasks[k].kind == TaskKind::kClassification) {
        std::vector<std::size_t> classes;
        for (const auto& id : ids) {
          classes.push_back(tasks[k].vocabulary->index_of(
              *cleaned.cell(*cleaned.find(id), tasks[k].name)));
        }
        set.targets.emplace_back(std::move(classes));
      } else {
        std::vector<double> values;
        for (const auto& id : ids) {
          values.push_back(scalers[k].apply(
              static_cast<double>(*cleaned.numeric(*cleaned.find(id), tasks[k].name))));
        }
        set.targets.emplace_back(std::move(values));
      }
    }
    return set;
  };
  const LabeledSet train = make_set(split.train);
  const LabeledSet validation = make_set(split.validation);

  auto model = MultitaskModel::initialize(base.dim(), config.shared_dim, tasks, config.init_seed);
  TrainResult training = train_shallow(std::move(model), train, validation, config.train);

  std::vector<double> shared_values;
  shared_values.reserve(base.size() * config.shared_dim);
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < base.size(); start += kChunk) {
    const std::size_t end = std::min(base.size(), start + kChunk);
    Matrix chunk(end - start, base.dim());
    for (std::size_t r = start; r < end; ++r) {
      const auto src = base.row(r);
      std::copy(src.begin(), src.end(), chunk.row(r - start).begin());
    }
    const Matrix shared = extract_features(training.model, chunk);
    for (std::size_t r = 0; r < shared.rows(); ++r) {
      double sum_sq = 0.0;
      for (double v : shared.row(r)) {
        const double narrowed = static_cast<double>(static_cast<float>(v));
        sum_sq += narrowed * narrowed;
        shared_values.push_back(narrowed);
      }
      if (sum_sq == 0.0) {
        throw InvariantError("item '" + base.item_id(start + r) +
                             "' has an all-zero shared representation and cannot be ranked");
      }
    }
  }
  EmbeddingMatrix embeddings(base.item_ids(), config.shared_dim, std::move(shared_values));

  FineTuneOutcome outcome{config.row_label(), training.model, std::move(training), split,
                          std::move(tasks), std::move(embeddings)};
  return outcome;
}

FineTuneOutcome run_finetune(const FineTuneConfig& config, const TransactionLog* log,
                             std::size_t evaluation_start) {
  const EmbeddingMatrix base = load_embeddings(config.base_embeddings);
  const MetadataTable metadata = load_metadata(config.metadata);

  std::vector<std::string> allowed;
  const std::vector<std::string>* allowed_ptr = nullptr;
  if (config.data_mode == FineTuneDataMode::kTemporal) {
    if (!log) throw ConfigError("temporal fine-tuning needs a transaction log");
    for (std::size_t pos = 0; pos < std::min(evaluation_start, log->size()); ++pos) {
      const auto& items = log->at(pos).items;
      allowed.insert(allowed.end(), items.begin(), items.end());
    }
    allowed_ptr = &allowed;
  }

  FineTuneOutcome outcome = shallow_finetune(base, metadata, config, allowed_ptr);
  if (!config.export_path.empty()) save_embeddings(outcome.embeddings, config.export_path);
  if (!config.checkpoint_path.empty()) save_checkpoint(outcome.model, config.checkpoint_path);
  if (!config.history_path.empty()) save_history(outcome.training.history, config.history_path);
  return outcome;
}

// ---------------------------------------------------------------------------
// Experiments

EvalReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const TransactionLog log = load_transactions(config.transactions);

  EvaluationSettings settings;
  settings.k = config.k;
  settings.aggregation = config.aggregation;
  settings.exclusion = config.exclusion;
  settings.evaluation_start = config.evaluation_start;
  settings.threads = config.threads;

  std::vector<std::pair<std::string, EmbeddingMatrix>> matrices;
  for (const auto& method : config.methods) {
    try {
      matrices.emplace_back(method.label, load_embeddings(method.embeddings));
    } catch (const Error& e) {
      throw Error("method '" + method.label + "': " + e.what());
    }
  }

  std::optional<FineTuneOutcome> finetuned;
  if (config.finetune) {
    try {
      finetuned = run_finetune(*config.finetune, &log, config.evaluation_start);
    } catch (const Error& e) {
      throw Error("method '" + config.finetune->row_label() + "': " + e.what());
    }
  }

  std::vector<std::string> catalog;
  if (config.catalog) {
    catalog = load_catalog(*config.catalog);
  } else if (!matrices.empty()) {
    catalog = matrices.front().second.item_ids();
  } else {
    catalog = finetuned->embeddings.item_ids();
  }

  EvalReport report;
  report.k = config.k;
  std::vector<MethodEvaluation> evaluations;
  const auto evaluate = [&](const std::string& label, const EmbeddingMatrix& matrix) {
    try {
      auto eval = replay_evaluate(log, matrix, catalog, settings);
      eval.label = label;
      evaluations.push_back(std::move(eval));
    } catch (const Error& e) {
      throw Error("method '" + label + "': " + e.what());
    }
  };
  for (const auto& [label, matrix] : matrices) evaluate(label, matrix);
  if (finetuned) evaluate(finetuned->label, finetuned->embeddings);
  evaluations.push_back(
      random_baseline(log, catalog, settings, config.random_seed, config.random_trials));
  for (const auto& eval : evaluations) report.rows.push_back(to_row(eval));

  const auto& first = evaluations.front();
  const std::size_t window = log.size() - std::min(log.size(), config.evaluation_start);
  report.notes.push_back(
      "K=" + std::to_string(config.k) + ", aggregation=" +
      (config.aggregation == Aggregation::kMax ? "max" : "mean") + ", exclusion=" +
      (config.exclusion == ExclusionScope::kGlobal ? "global" : "user") +
      ", catalog=" + std::to_string(catalog.size()) + " items, evaluation window starts at " +
      "transaction " + std::to_string(config.evaluation_start) + ".");
  report.notes.push_back("Evaluated " + std::to_string(first.evaluated) + " of " +
                         std::to_string(window) + " transactions in the window; " +
                         std::to_string(first.skipped) +
                         " skipped because the user had no earlier purchase.");
  if (first.evaluated == 0) {
    report.notes.push_back(
        "WARNING: no transaction had a non-empty profile; metrics are undefined.");
  } else {
    std::string f1 = "F1@" + std::to_string(config.k) +
                     " is averaged per transaction. F1 of the averaged P and R instead:";
    for (const auto& eval : evaluations) {
      const double p = eval.metrics.mean.precision;
      const double r = eval.metrics.mean.recall;
      f1 += " " + eval.label + "=" + format4(p + r == 0.0 ? 0.0 : 2 * p * r / (p + r)) + ";";
    }
    f1.pop_back();
    report.notes.push_back(f1 + ".");
  }
  report.notes.push_back("Random: " + std::to_string(config.random_trials) +
                         " trials per transaction, seed " + std::to_string(config.random_seed) +
                         ", drawn from the same candidate sets as the other methods.");
  if (finetuned) {
    const auto& tr = finetuned->training;
    report.notes.push_back(
        finetuned->label + ": shallow fine-tuning ran " + std::to_string(tr.history.size()) +
        " epochs, best epoch " + std::to_string(tr.best_epoch) + " (validation loss " +
        format4(tr.history.at(tr.best_epoch - 1).val_loss) + "), " +
        std::to_string(finetuned->split.train.size()) + "/" +
        std::to_string(finetuned->split.validation.size()) + "/" +
        std::to_string(finetuned->split.test.size()) + " train/validation/test items.");
  }

  write_report(report, config.report_text, config.report_csv);
  return report;
}

}  // namespace embrec
