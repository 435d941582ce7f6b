#include "embrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "embrec/error.hpp"
#include "embrec/random.hpp"

namespace embrec {
namespace {

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

}  // namespace

PlantedDataset make_planted_dataset(const PlantedDatasetConfig& cfg) {
  if (cfg.clusters == 0 || cfg.items_per_cluster == 0 || cfg.taste_dims == 0) {
    throw InvariantError("planted dataset needs clusters, items and taste dims");
  }
  if (cfg.medium_labels < 2 || cfg.medium_labels > cfg.nuisance_dims) {
    throw InvariantError("medium_labels must lie in [2, nuisance_dims]");
  }
  if (cfg.max_items_per_transaction == 0) {
    throw InvariantError("max_items_per_transaction must be positive");
  }
  Rng rng(cfg.seed);
  const std::size_t dim = cfg.taste_dims + cfg.nuisance_dims;
  const std::size_t n_items = cfg.clusters * cfg.items_per_cluster;

  std::vector<std::vector<double>> centers(cfg.clusters, std::vector<double>(cfg.taste_dims));
  for (auto& c : centers) {
    for (double& v : c) v = cfg.center_scale * rng.normal();
  }

  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<std::size_t> item_cluster;
  std::vector<MetadataTable::Row> rows;
  values.reserve(n_items * dim);
  for (std::size_t i = 0; i < n_items; ++i) {
    const std::size_t cluster = i % cfg.clusters;
    ids.push_back(padded("item-", i, 5));
    item_cluster.push_back(cluster);
    for (std::size_t d = 0; d < cfg.taste_dims; ++d) {
      values.push_back(centers[cluster][d] + cfg.item_noise * rng.normal());
    }
    std::size_t medium = 0;
    double best = -INFINITY;
    for (std::size_t d = 0; d < cfg.nuisance_dims; ++d) {
      const double v = cfg.nuisance_scale * rng.normal();
      values.push_back(v);
      if (d < cfg.medium_labels && v > best) {
        best = v;
        medium = d;
      }
    }
    const auto year = 1900 + static_cast<long>(std::lround(40.0 * rng.normal()));
    rows.push_back({ids.back(),
                    {padded("style-", cluster, 2), padded("medium-", medium, 2),
                     std::to_string(year)}});
  }

  // Global chronology: rounds over users in shuffled order.
  std::vector<std::vector<std::size_t>> available(cfg.clusters);
  for (std::size_t i = 0; i < n_items; ++i) available[item_cluster[i]].push_back(i);
  std::vector<std::size_t> user_cluster(cfg.users);
  for (auto& c : user_cluster) c = static_cast<std::size_t>(rng.uniform_index(cfg.clusters));
  std::vector<std::size_t> next_ordinal(cfg.users, 0);
  std::vector<Transaction> transactions;
  std::vector<std::size_t> order(cfg.users);
  for (std::size_t round = 0; round < cfg.transactions_per_user; ++round) {
    for (std::size_t u = 0; u < cfg.users; ++u) order[u] = u;
    rng.shuffle(std::span(order));
    for (std::size_t u : order) {
      auto& pool = available[user_cluster[u]];
      if (pool.empty()) continue;
      const std::size_t want =
          1 + static_cast<std::size_t>(rng.uniform_index(cfg.max_items_per_transaction));
      Transaction t{padded("user-", u, 4), next_ordinal[u]++, {}};
      for (std::size_t b = 0; b < want && !pool.empty(); ++b) {
        const auto pick = static_cast<std::size_t>(rng.uniform_index(pool.size()));
        t.items.push_back(ids[pool[pick]]);
        pool[pick] = pool.back();
        pool.pop_back();
      }
      transactions.push_back(std::move(t));
    }
  }

  TransactionLog log(std::move(transactions));
  // Users who never bought anything are absent from the log.
  std::vector<std::size_t> logged_user_cluster;
  for (const auto& user : log.users()) {
    logged_user_cluster.push_back(user_cluster[std::stoul(user.substr(5))]);
  }

  return PlantedDataset{EmbeddingMatrix(ids, dim, std::move(values)),
                        std::move(log),
                        MetadataTable({"style", "medium", "year"}, std::move(rows)),
                        ids,
                        std::move(item_cluster),
                        std::move(logged_user_cluster)};
}

EmbeddingMatrix permute_rows(const EmbeddingMatrix& matrix, std::uint64_t seed) {
  std::vector<std::size_t> order(matrix.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));
  std::vector<double> values;
  values.reserve(matrix.values().size());
  for (std::size_t i : order) {
    const auto r = matrix.row(i);
    values.insert(values.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(matrix.item_ids(), matrix.dim(), std::move(values));
}

void write_planted_dataset(const PlantedDataset& data, const std::string& directory,
                           std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const auto at = [&](const char* name) { return (fs::path(directory) / name).string(); };
  save_embeddings(data.embeddings, at("embeddings.emb1"));
  save_embeddings(permute_rows(data.embeddings, seed + 1), at("permuted.emb1"));
  save_transactions(data.log, at("transactions.csv"));
  save_metadata(data.metadata, at("metadata.csv"));
  {
    std::ofstream out(at("catalog.txt"));
    for (const auto& id : data.catalog) out << id << '\n';
  }
  std::ofstream cfg(at("experiment.json"));
  cfg << R"({
  "transactions": "transactions.csv",
  "catalog": "catalog.txt",
  "methods": [
    {"label": "raw", "embeddings": "embeddings.emb1"},
    {"label": "raw-permuted", "embeddings": "permuted.emb1"}
  ],
  "k": 20,
  "aggregation": "max",
  "exclusion": "global",
  "random_baseline": {"seed": )"
      << seed << R"(, "trials": 100},
  "finetune": {
    "label": "shallow-style",
    "base_embeddings": "embeddings.emb1",
    "metadata": "metadata.csv",
    "tasks": [{"attribute": "style", "kind": "classification", "weight": 1.0}],
    "shared_dim": 64,
    "learning_rate": 0.001,
    "batch_size": 32,
    "patience": 5,
    "max_epochs": 200,
    "seed": )"
      << seed << R"(,
    "export": "finetuned.emb1",
    "checkpoint": "finetuned.mth1",
    "history": "history.csv"
  },
  "output": {"report": "report.txt", "csv": "report.csv"}
}
)";
}

}  // namespace embrec
