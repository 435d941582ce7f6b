#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "embrec/experiment_config.hpp"
#include "embrec/harness.hpp"
#include "embrec/synthetic.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace embrec {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Config, ParsesFullDocument) {
  const auto cfg = parse_experiment_config(R"({
    "transactions": "t.csv", "catalog": "c.txt",
    "methods": [{"label": "resnet", "embeddings": "/abs/r.emb1"}],
    "k": 10, "aggregation": "mean", "exclusion": "user", "evaluation_start": 5, "threads": 3,
    "random_baseline": {"seed": 9, "trials": 50},
    "finetune": {"base_embeddings": "r.emb1", "metadata": "m.csv",
                 "tasks": [{"attribute": "medium", "kind": "classification", "weight": 2.0},
                           {"attribute": "year", "kind": "regression"}],
                 "shared_dim": 32, "patience": 7, "split": [0.6, 0.2, 0.2],
                 "data_mode": "temporal"},
    "output": {"report": "out/r.txt", "csv": "out/r.csv"}
  })", "/base", "cfg");
  EXPECT_EQ(cfg.transactions, "/base/t.csv");
  EXPECT_EQ(cfg.catalog, "/base/c.txt");
  EXPECT_EQ(cfg.methods.at(0).embeddings, "/abs/r.emb1");
  EXPECT_EQ(cfg.k, 10u);
  EXPECT_EQ(cfg.aggregation, Aggregation::kMean);
  EXPECT_EQ(cfg.exclusion, ExclusionScope::kUserOnly);
  EXPECT_EQ(cfg.evaluation_start, 5u);
  EXPECT_EQ(cfg.threads, 3u);
  EXPECT_EQ(cfg.random_seed, 9u);
  EXPECT_EQ(cfg.random_trials, 50u);
  ASSERT_TRUE(cfg.finetune);
  EXPECT_EQ(cfg.finetune->tasks.size(), 2u);
  EXPECT_EQ(cfg.finetune->tasks[0].weight, 2.0);
  EXPECT_EQ(cfg.finetune->tasks[1].kind, TaskKind::kRegression);
  EXPECT_EQ(cfg.finetune->tasks[1].weight, 1.0);
  EXPECT_EQ(cfg.finetune->train.patience, 7u);
  EXPECT_EQ(cfg.finetune->train.adam.learning_rate, 1e-4);
  EXPECT_EQ(cfg.finetune->data_mode, FineTuneDataMode::kTemporal);
  EXPECT_FALSE(cfg.finetune->row_label().empty());
  EXPECT_EQ(cfg.report_csv, "/base/out/r.csv");
}

TEST(Config, Defaults) {
  const auto cfg = parse_experiment_config(
      R"({"transactions": "t.csv", "methods": [{"label": "a", "embeddings": "a.emb1"}]})", "",
      "cfg");
  EXPECT_EQ(cfg.k, 20u);
  EXPECT_EQ(cfg.aggregation, Aggregation::kMax);
  EXPECT_EQ(cfg.exclusion, ExclusionScope::kGlobal);
  EXPECT_EQ(cfg.threads, 1u);
  EXPECT_FALSE(cfg.catalog);
  EXPECT_FALSE(cfg.finetune);
}

TEST(Config, RejectsBadDocuments) {
  const auto bad = [](const std::string& json) {
    EXPECT_THROW(parse_experiment_config(json, "", "cfg"), Error) << json;
  };
  bad("{");
  bad(R"({"methods": [{"label": "a", "embeddings": "a"}]})");
  bad(R"({"transactions": "t", "methods": [{"label": "a", "embeddings": "a"}], "kk": 1})");
  bad(R"({"transactions": "t", "methods": [{"label": "a", "embeddings": "a"}], "k": 0})");
  bad(R"({"transactions": "t", "methods": [{"label": "a", "embeddings": "a"}], "k": -3})");
  bad(R"({"transactions": "t", "methods": [{"label": "a", "embeddings": "a"}],
          "aggregation": "sum"})");
  bad(R"({"transactions": "t", "methods": []})");
  bad(R"({"transactions": "t", "methods": [{"label": "Random", "embeddings": "a"}]})");
  bad(R"({"transactions": "t", "methods": [{"label": "a", "embeddings": "a"},
                                           {"label": "a", "embeddings": "b"}]})");
  bad(R"({"transactions": "t", "finetune": {"base_embeddings": "b", "metadata": "m",
          "tasks": [{"attribute": "x", "kind": "ranking"}]}})");
  bad(R"({"transactions": "t", "finetune": {"base_embeddings": "b", "metadata": "m",
          "tasks": []}})");
}

EmbeddingMatrix plane(std::vector<std::pair<std::string, double>> angles) {
  std::vector<std::string> ids;
  std::vector<double> values;
  for (const auto& [id, a] : angles) {
    ids.push_back(id);
    values.push_back(std::cos(a));
    values.push_back(std::sin(a));
  }
  return EmbeddingMatrix(ids, 2, values);
}

TEST(Replay, MostSimilarNextPurchaseIsRecalled) {
  const auto emb = plane({{"a", 0.0}, {"b", 0.1}, {"c", 1.5}, {"d", 2.5}, {"e", 3.0}});
  const TransactionLog log({{"u", 0, {"a"}}, {"u", 1, {"b"}}});
  EvaluationSettings s;
  s.k = 1;
  s.keep_trace = true;
  const auto r = replay_evaluate(log, emb, emb.item_ids(), s);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.metrics.mean.recall, 1.0);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].recommended, (std::vector<std::string>{"b"}));
  EXPECT_EQ(r.trace[0].candidates, (std::vector<std::string>{"b", "c", "d", "e"}));
}

TEST(Replay, OnlyFirstTransactionsMeansNothingEvaluated) {
  const auto emb = plane({{"a", 0.0}, {"b", 0.1}, {"c", 1.5}});
  const TransactionLog log({{"u1", 0, {"a"}}, {"u2", 0, {"b"}}});
  const auto r = replay_evaluate(log, emb, emb.item_ids(), EvaluationSettings{});
  EXPECT_EQ(r.evaluated, 0u);
  EXPECT_EQ(r.skipped, 2u);
  EXPECT_EQ(r.metrics.mean, MetricValues{});
}

TEST(Replay, MissingEmbeddingIsReported) {
  const auto emb = plane({{"a", 0.0}, {"b", 0.1}});
  const TransactionLog log({{"u", 0, {"a"}}, {"u", 1, {"c"}}});
  const std::vector<std::string> catalog{"a", "b", "c"};
  EXPECT_THROW(replay_evaluate(log, emb, catalog, EvaluationSettings{}), NotFoundError);
}

TEST(Replay, EvaluationStartSkipsEarlierPositions) {
  const auto emb = plane({{"a", 0.0}, {"b", 0.1}, {"c", 0.2}, {"d", 2.0}});
  const TransactionLog log({{"u", 0, {"a"}}, {"u", 1, {"b"}}, {"u", 2, {"c"}}});
  EXPECT_EQ(evaluated_positions(log, 0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(evaluated_positions(log, 2), (std::vector<std::size_t>{2}));
  EvaluationSettings s;
  s.evaluation_start = 2;
  EXPECT_EQ(replay_evaluate(log, emb, emb.item_ids(), s).evaluated, 1u);
}

PlantedDatasetConfig small_planted(std::uint64_t seed) {
  PlantedDatasetConfig c;
  c.clusters = 5;
  c.items_per_cluster = 30;
  c.users = 40;
  c.seed = seed;
  return c;
}

TEST(Replay, PlantedClustersMatchScriptedPipeline) {
  const auto data = make_planted_dataset(small_planted(3));
  for (bool use_max : {true, false}) {
    for (bool global : {true, false}) {
      EvaluationSettings s;
      s.k = 10;
      s.aggregation = use_max ? Aggregation::kMax : Aggregation::kMean;
      s.exclusion = global ? ExclusionScope::kGlobal : ExclusionScope::kUserOnly;
      s.keep_trace = true;
      const auto got = replay_evaluate(data.log, data.embeddings, data.catalog, s);
      const auto want = oracle::pipeline(data.log.transactions(), data.catalog, data.embeddings,
                                         10, use_max, global);
      ASSERT_EQ(got.evaluated, want.rows.size());
      EXPECT_EQ(got.skipped, want.skipped);
      double recall_sum = 0;
      for (std::size_t i = 0; i < want.rows.size(); ++i) {
        const auto& g = got.metrics.per_transaction[i];
        const auto& w = want.rows[i];
        EXPECT_EQ(got.trace[i].recommended, want.recommended[i]) << i;
        EXPECT_NEAR(g.recall, w.recall, 1e-12);
        EXPECT_NEAR(g.precision, w.precision, 1e-12);
        EXPECT_NEAR(g.f1, w.f1, 1e-12);
        EXPECT_NEAR(g.map, w.map, 1e-12);
        EXPECT_NEAR(g.mrr, w.mrr, 1e-12);
        EXPECT_NEAR(g.ndcg, w.ndcg, 1e-12);
        recall_sum += w.recall;
      }
      EXPECT_NEAR(got.metrics.mean.recall, recall_sum / static_cast<double>(want.rows.size()),
                  1e-12);
    }
  }
}

TEST(Replay, ThreadCountDoesNotChangeResults) {
  const auto data = make_planted_dataset(small_planted(4));
  EvaluationSettings one;
  EvaluationSettings many;
  many.threads = 4;
  const auto a = replay_evaluate(data.log, data.embeddings, data.catalog, one);
  const auto b = replay_evaluate(data.log, data.embeddings, data.catalog, many);
  EXPECT_EQ(a.metrics.per_transaction, b.metrics.per_transaction);
  EXPECT_EQ(a.metrics.mean, b.metrics.mean);
  const auto ra = random_baseline(data.log, data.catalog, one, 5, 20);
  const auto rb = random_baseline(data.log, data.catalog, many, 5, 20);
  EXPECT_EQ(ra.metrics.mean, rb.metrics.mean);
}

TEST(RandomBaseline, CandidateSetOfSizeKAlwaysHits) {
  std::vector<std::string> catalog{"first"};
  for (int i = 0; i < 20; ++i) catalog.push_back("c" + std::to_string(i));
  const TransactionLog log({{"u", 0, {"first"}}, {"u", 1, {"c7"}}});
  EvaluationSettings s;
  s.k = 20;
  const auto r = random_baseline(log, catalog, s, 1, 50);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.metrics.mean.recall, 1.0);
}

TEST(RandomBaseline, RecallNearKOverN) {
  std::vector<std::string> catalog{"first"};
  for (int i = 0; i < 100; ++i) catalog.push_back("c" + std::to_string(i));
  const TransactionLog log({{"u", 0, {"first"}}, {"u", 1, {"c42"}}});
  EvaluationSettings s;
  s.k = 10;
  const std::size_t trials = 4000;
  const auto r = random_baseline(log, catalog, s, 77, trials);
  const double p = 0.1;
  const double se = std::sqrt(p * (1 - p) / trials);
  EXPECT_NEAR(r.metrics.mean.recall, p, 3 * se);
  EXPECT_EQ(r.metrics.mean.recall, random_baseline(log, catalog, s, 77, trials).metrics.mean.recall);
  EXPECT_NE(r.metrics.mean.recall, random_baseline(log, catalog, s, 78, trials).metrics.mean.recall);
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testutil::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    write_planted_dataset(make_planted_dataset(small_planted(6)), dir_.string(), 6);
  }
  ExperimentConfig config() const {
    return load_experiment_config((dir_ / "experiment.json").string());
  }
  std::filesystem::path dir_;
};

TEST_F(ExperimentTest, TwoMethodsGiveThreeRows) {
  auto cfg = config();
  cfg.finetune.reset();
  cfg.random_trials = 5;
  const auto report = run_experiment(cfg);
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].label, "raw");
  EXPECT_EQ(report.rows[1].label, "raw-permuted");
  EXPECT_EQ(report.rows[2].label, "Random");
  const auto text = read_file(dir_ / "report.txt");
  EXPECT_EQ(text, format_report_text(report));
  EXPECT_NE(text.find("R@20"), std::string::npos);
  const auto csv = read_file(dir_ / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,recall@20,precision@20,f1@20,map@20,mrr@20,ndcg@20,evaluated,skipped,"
            "mean_candidates");
}

TEST_F(ExperimentTest, FineTuneBlockAddsRowAndArtifacts) {
  auto cfg = config();
  cfg.random_trials = 5;
  cfg.finetune->train.max_epochs = 20;
  const auto report = run_experiment(cfg);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[2].label, cfg.finetune->row_label());
  EXPECT_EQ(report.rows[3].label, "Random");
  const auto exported = load_embeddings((dir_ / "finetuned.emb1").string());
  EXPECT_EQ(exported.dim(), cfg.finetune->shared_dim);
  const auto model = load_checkpoint((dir_ / "finetuned.mth1").string());
  EXPECT_EQ(model.shared_dim(), cfg.finetune->shared_dim);
  const auto history = read_file(dir_ / "history.csv");
  EXPECT_EQ(history.rfind("epoch,train_loss,val_loss\n", 0), 0u);
}

TEST_F(ExperimentTest, RepeatedRunsAreByteIdentical) {
  auto cfg = config();
  cfg.random_trials = 5;
  cfg.finetune->train.max_epochs = 10;
  run_experiment(cfg);
  const auto first = read_file(dir_ / "report.txt") + read_file(dir_ / "report.csv");
  run_experiment(cfg);
  EXPECT_EQ(read_file(dir_ / "report.txt") + read_file(dir_ / "report.csv"), first);
}

TEST(FineTune, ExportCoversEveryBaseItem) {
  const auto data = make_planted_dataset(small_planted(8));
  FineTuneConfig cfg;
  cfg.tasks = {{"style", TaskKind::kClassification, 1.0}, {"year", TaskKind::kRegression, 0.5}};
  cfg.shared_dim = 16;
  cfg.train.max_epochs = 5;
  const auto out = shallow_finetune(data.embeddings, data.metadata, cfg);
  EXPECT_EQ(out.embeddings.item_ids(), data.embeddings.item_ids());
  EXPECT_EQ(out.embeddings.dim(), 16u);
  EXPECT_EQ(out.tasks.size(), 2u);
  ASSERT_TRUE(out.tasks[0].vocabulary);
  EXPECT_EQ(out.tasks[0].n_classes, 5u);
  EXPECT_EQ(out.split.train.size() + out.split.validation.size() + out.split.test.size(),
            data.metadata.size());
  for (double v : out.embeddings.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(FineTune, UnknownAttributeFails) {
  const auto data = make_planted_dataset(small_planted(9));
  FineTuneConfig cfg;
  cfg.tasks = {{"artist", TaskKind::kClassification, 1.0}};
  EXPECT_THROW(shallow_finetune(data.embeddings, data.metadata, cfg), NotFoundError);
}

TEST(RankingFiles, ScoresQueries) {
  const std::string recs = "query_id,rank,item_id\nq1,1,a\nq1,2,b\nq2,1,x\nq3,1,z\n";
  const std::string truth = "query_id,item_id\nq1,b\nq2,y\nq4,w\n";
  const auto s = score_ranking_csv(recs, truth, 2);
  EXPECT_EQ(s.queries, 3u);
  EXPECT_EQ(s.queries_without_recs, 1u);
  EXPECT_EQ(s.queries_without_truth, 1u);
  EXPECT_NEAR(s.metrics.mean.recall, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.metrics.mean.mrr, 0.5 / 3.0, 1e-15);
}

TEST(RankingFiles, LineErrors) {
  const std::string truth = "query_id,item_id\nq1,a\n";
  const auto line_of = [&](const std::string& recs) {
    try {
      score_ranking_csv(recs, truth, 5);
    } catch (const FormatError& e) {
      return e.position();
    }
    ADD_FAILURE() << recs;
    return std::uint64_t{0};
  };
  EXPECT_EQ(line_of("query_id,rank,item_id\nq1,1,a\nq1,1,b\n"), 3u);
  EXPECT_EQ(line_of("query_id,rank,item_id\nq1,1,a\nq1,2,a\n"), 3u);
  EXPECT_EQ(line_of("query_id,rank,item_id\nq1,0,a\n"), 2u);
  EXPECT_EQ(line_of("bad header\n"), 1u);
}

TEST(Report, TextAndCsvFormatting) {
  EvalReport r;
  r.k = 5;
  r.rows = {{"emb", {0.123456, 0.5, 0.25, 0.1, 0.2, 0.3}, 10, 2, 42.25},
            {"empty", {}, 0, 3, 0.0}};
  r.notes = {"hello"};
  const auto text = format_report_text(r);
  EXPECT_NE(text.find("0.1235"), std::string::npos);
  EXPECT_NE(text.find("n/a"), std::string::npos);
  EXPECT_NE(text.find("* hello"), std::string::npos);
  EXPECT_NE(text.find("R@5"), std::string::npos);
  const auto csv = format_report_csv(r);
  EXPECT_NE(csv.find("emb,0.123456,0.5,0.25,0.1,0.2,0.3,10,2,42.25\n"), std::string::npos);
}

}  // namespace
}  // namespace embrec
