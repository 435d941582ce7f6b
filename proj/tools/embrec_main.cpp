// embrec: evaluate embedding files for purchase prediction, fine-tune a
// shared representation over frozen features, and score ranking files.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "embrec/error.hpp"
#include "embrec/harness.hpp"
#include "embrec/synthetic.hpp"

namespace {

int run_eval(const std::string& config_path) {
  const auto config = embrec::load_experiment_config(config_path);
  const auto report = embrec::run_experiment(config);
  std::cout << embrec::format_report_text(report);
  return 0;
}

int run_finetune(const std::string& config_path) {
  const auto config = embrec::load_experiment_config(config_path);
  if (!config.finetune) throw embrec::ConfigError(config_path + ": no 'finetune' block");
  std::optional<embrec::TransactionLog> log;
  if (config.finetune->data_mode == embrec::FineTuneDataMode::kTemporal) {
    log = embrec::load_transactions(config.transactions);
  }
  const auto outcome =
      embrec::run_finetune(*config.finetune, log ? &*log : nullptr, config.evaluation_start);
  std::cout << embrec::format_history(outcome.training.history);
  std::cout << "best epoch " << outcome.training.best_epoch << " of "
            << outcome.training.history.size() << "; exported " << outcome.embeddings.size()
            << " items of dim " << outcome.embeddings.dim() << '\n';
  return 0;
}

int run_metrics(const std::string& recs, const std::string& truth, std::size_t k,
                const std::string& csv_out) {
  const auto score = embrec::score_ranking_files(recs, truth, k);
  embrec::EvalReport report;
  report.k = k;
  report.rows.push_back({"recs", score.metrics.mean, score.queries, 0, 0.0});
  report.notes.push_back(std::to_string(score.queries) + " queries scored; " +
                         std::to_string(score.queries_without_recs) +
                         " had no recommendations; " +
                         std::to_string(score.queries_without_truth) +
                         " recommendation lists had no ground truth and were ignored.");
  std::cout << embrec::format_report_text(report);
  if (!csv_out.empty()) embrec::write_report(report, "", csv_out);
  return 0;
}

int run_synth(const std::string& out_dir, std::uint64_t seed, std::size_t users) {
  embrec::PlantedDatasetConfig cfg;
  cfg.seed = seed;
  cfg.users = users;
  const auto data = embrec::make_planted_dataset(cfg);
  embrec::write_planted_dataset(data, out_dir, seed);
  std::cout << "wrote " << data.catalog.size() << " items, " << data.log.size()
            << " transactions to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Content-based image recommendation: evaluation and shallow fine-tuning"};
  app.require_subcommand(1);

  std::string config_path;
  auto* eval = app.add_subcommand("eval", "Run an experiment and print the report");
  eval->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  auto* finetune = app.add_subcommand("finetune", "Train the shared layer and export embeddings");
  finetune->add_option("--config", config_path, "Experiment JSON with a finetune block")
      ->required()
      ->check(CLI::ExistingFile);

  std::string recs, truth, csv_out;
  std::size_t k = 20;
  auto* metrics = app.add_subcommand("metrics", "Score ranked lists against ground truth");
  metrics->add_option("--recs", recs, "CSV query_id,rank,item_id")->required()->check(CLI::ExistingFile);
  metrics->add_option("--truth", truth, "CSV query_id,item_id")->required()->check(CLI::ExistingFile);
  metrics->add_option("--k", k, "Cutoff")->check(CLI::PositiveNumber);
  metrics->add_option("--csv", csv_out, "Also write the scores as CSV");

  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t users = 200;
  auto* synth = app.add_subcommand("synth", "Write a planted-preference demo dataset");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--users", users, "Number of users")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) return run_eval(config_path);
    if (*finetune) return run_finetune(config_path);
    if (*metrics) return run_metrics(recs, truth, k, csv_out);
    if (*synth) return run_synth(out_dir, seed, users);
  } catch (const std::exception& e) {
    std::cerr << "embrec: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
