#pragma once

// Planted-preference synthetic data. Items live in Gaussian clusters in a
// low-variance "taste" subspace, padded with high-variance nuisance
// dimensions that carry no preference signal. Each user favours one cluster
// and buys only from it, so a good embedding must recover the taste
// subspace. Metadata offers a cluster-aligned label ("style"), a label
// driven purely by the nuisance dimensions ("medium") and a numeric
// attribute ("year").

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "embrec/dataset.hpp"
#include "embrec/embedding_store.hpp"

namespace embrec {

struct PlantedDatasetConfig {
  std::size_t clusters = 12;
  std::size_t items_per_cluster = 80;
  std::size_t taste_dims = 8;
  std::size_t nuisance_dims = 24;
  double center_scale = 1.0;
  double item_noise = 0.35;
  double nuisance_scale = 1.5;
  std::size_t users = 200;
  std::size_t transactions_per_user = 3;
  std::size_t max_items_per_transaction = 2;
  std::size_t medium_labels = 4;  // must not exceed nuisance_dims
  std::uint64_t seed = 0;
};

struct PlantedDataset {
  EmbeddingMatrix embeddings;
  TransactionLog log;
  MetadataTable metadata;
  std::vector<std::string> catalog;
  std::vector<std::size_t> item_cluster;  // by catalog index
  std::vector<std::size_t> user_cluster;  // by log.users() index
};

PlantedDataset make_planted_dataset(const PlantedDatasetConfig& config);

/// Same ids, rows shuffled among them: destroys any id/content alignment.
EmbeddingMatrix permute_rows(const EmbeddingMatrix& matrix, std::uint64_t seed);

/// Writes embeddings.emb1, permuted.emb1, transactions.csv, metadata.csv,
/// catalog.txt and a ready-to-run experiment.json into `directory`.
void write_planted_dataset(const PlantedDataset& data, const std::string& directory,
                           std::uint64_t seed);

}  // namespace embrec
