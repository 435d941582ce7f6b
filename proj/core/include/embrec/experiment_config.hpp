#pragma once

// Experiment configuration, read from a JSON file. Relative paths resolve
// against the directory holding the config file.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "embrec/multitask_head.hpp"
#include "embrec/recommender.hpp"

namespace embrec {

struct MethodSpec {
  std::string label;
  std::string embeddings;  // EMB1 or text embedding file
};

struct FineTuneTask {
  std::string attribute;
  TaskKind kind = TaskKind::kClassification;
  double weight = 1.0;
};

/// Which items may supply fine-tuning labels.
enum class FineTuneDataMode {
  kCatalog,   // every labeled item of the catalog
  kTemporal,  // only items sold before the evaluation window starts
};

struct FineTuneConfig {
  std::string label;  // empty: derived from the task list
  std::string base_embeddings;
  std::string metadata;
  std::vector<FineTuneTask> tasks;
  std::size_t shared_dim = MultitaskModel::kDefaultSharedDim;
  TrainConfig train;
  std::uint64_t init_seed = 0;
  std::array<double, 3> split{0.7, 0.2, 0.1};
  std::uint64_t split_seed = 0;
  std::size_t min_count = 1;
  std::optional<double> max_missing_fraction;
  FineTuneDataMode data_mode = FineTuneDataMode::kCatalog;
  std::string export_path;      // EMB1 of shared-layer activations, optional
  std::string checkpoint_path;  // MTH1, optional
  std::string history_path;     // epoch CSV, optional

  /// Defaults follow the small-dataset setting: learning rate 1e-4.
  FineTuneConfig() { train.adam.learning_rate = 1e-4; }

  std::string row_label() const;
};

struct ExperimentConfig {
  std::string transactions;
  std::optional<std::string> catalog;  // one item id per line; default: first method's ids
  std::vector<MethodSpec> methods;
  std::size_t k = 20;
  Aggregation aggregation = Aggregation::kMax;
  ExclusionScope exclusion = ExclusionScope::kGlobal;
  std::size_t evaluation_start = 0;  // first global transaction position evaluated
  std::size_t threads = 1;
  std::uint64_t random_seed = 0;
  std::size_t random_trials = 100;
  std::optional<FineTuneConfig> finetune;
  std::string report_text;  // optional output paths
  std::string report_csv;

  void validate() const;
};

/// Throws FormatError (bad JSON, unknown keys, wrong types) or InvariantError.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir,
                                         const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::string& path);

std::vector<std::string> load_catalog(const std::string& path);

}  // namespace embrec
