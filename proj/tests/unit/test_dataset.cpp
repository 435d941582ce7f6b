#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "embrec/dataset.hpp"
#include "embrec/error.hpp"
#include "embrec/random.hpp"
#include "temp_dir.hpp"

namespace embrec {
namespace {

constexpr const char* kHeader = "user_id,transaction_ordinal,item_id\n";

TransactionLog parse_log(const std::string& body) {
  return parse_transactions(std::string(kHeader) + body, "mem");
}

std::size_t error_line(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.location_kind(), FormatError::Location::kLine);
    return e.position();
  }
  ADD_FAILURE() << "expected FormatError";
  return 0;
}

TEST(LoadTransactions, GroupsRowsByUserAndOrdinal) {
  const auto log = parse_log("u1,0,a\nu1,0,b\nu1,1,c\n");
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.at(0).user_id, "u1");
  EXPECT_EQ(log.at(0).items, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(log.at(1).ordinal, 1u);
  EXPECT_EQ(log.at(1).items, (std::vector<std::string>{"c"}));
  EXPECT_EQ(log.position_of("u1", 1), 1u);
  EXPECT_EQ(log.purchase_position("b"), 0u);
  EXPECT_FALSE(log.purchase_position("zz").has_value());
}

TEST(LoadTransactions, UniqueArtworkViolation) {
  EXPECT_EQ(error_line([] { parse_log("u1,0,a\nu2,0,a\n"); }), 3u);
  EXPECT_THROW(TransactionLog({{"u1", 0, {"a"}}, {"u2", 0, {"a"}}}), InvariantError);
}

TEST(LoadTransactions, NonContiguousOrdinal) {
  EXPECT_THROW(parse_log("u1,0,a\nu1,2,b\n"), InvariantError);
  EXPECT_THROW(parse_log("u1,1,a\n"), InvariantError);
}

TEST(LoadTransactions, OrdinalsMustFollowFirstAppearance) {
  EXPECT_THROW(parse_log("u1,1,b\nu1,0,a\n"), InvariantError);
}

TEST(LoadTransactions, InterleavedUsersKeepFirstAppearanceOrder) {
  const auto log = parse_log("u1,0,a\nu2,0,b\nu1,1,c\nu2,0,d\nu2,1,e\n");
  ASSERT_EQ(log.size(), 4u);
  EXPECT_EQ(log.at(1).items, (std::vector<std::string>{"b", "d"}));
  EXPECT_EQ(log.users(), (std::vector<std::string>{"u1", "u2"}));
  const auto positions = log.positions_of("u2");
  EXPECT_EQ(std::vector<std::size_t>(positions.begin(), positions.end()),
            (std::vector<std::size_t>{1, 3}));
  EXPECT_THROW(log.positions_of("nobody"), NotFoundError);
}

TEST(LoadTransactions, MalformedInputs) {
  EXPECT_EQ(error_line([] { parse_transactions("", "mem"); }), 1u);
  EXPECT_EQ(error_line([] { parse_transactions(kHeader, "mem"); }), 1u);
  EXPECT_EQ(error_line([] { parse_transactions("user,ordinal,item\n", "mem"); }), 1u);
  EXPECT_EQ(error_line([] { parse_log("u1,0\n"); }), 2u);
  EXPECT_EQ(error_line([] { parse_log("u1,0,a\nu1,x,b\n"); }), 3u);
  EXPECT_EQ(error_line([] { parse_log("u1,-1,a\n"); }), 2u);
  EXPECT_EQ(error_line([] { parse_log(",0,a\n"); }), 2u);
}

TEST(LoadTransactions, SaveLoadRoundTrip) {
  const auto dir = testutil::scratch_dir("tx_roundtrip");
  const auto log = parse_log("u2,0,z\nu1,0,b\nu1,0,a\nu2,1,y\n");
  save_transactions(log, (dir / "t.csv").string());
  const auto back = load_transactions((dir / "t.csv").string());
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back.at(i).user_id, log.at(i).user_id);
    EXPECT_EQ(back.at(i).ordinal, log.at(i).ordinal);
    EXPECT_EQ(back.at(i).items, log.at(i).items);
  }
}

MetadataTable table(std::vector<std::string> attrs,
                    std::vector<std::vector<std::optional<std::string>>> cells) {
  std::vector<MetadataTable::Row> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    rows.push_back({"i" + std::to_string(i), cells[i]});
  }
  return MetadataTable(std::move(attrs), std::move(rows));
}

TEST(Metadata, ParseMissingCellsAndKinds) {
  const auto meta = parse_metadata("item_id,medium,year\na,oil,1990\nb,,2001\nc,acrylic,\n", "m");
  ASSERT_EQ(meta.size(), 3u);
  EXPECT_FALSE(meta.cell(meta.rows()[1], "medium").has_value());
  EXPECT_EQ(meta.kind("medium"), AttributeKind::kCategorical);
  EXPECT_EQ(meta.kind("year"), AttributeKind::kNumeric);
  EXPECT_EQ(meta.numeric(*meta.find("b"), "year"), 2001);
  EXPECT_FALSE(meta.numeric(*meta.find("c"), "year").has_value());
  EXPECT_THROW(meta.numeric(*meta.find("a"), "medium"), InvariantError);
  EXPECT_THROW(meta.column("artist"), NotFoundError);
  EXPECT_EQ(meta.find("zz"), nullptr);
}

TEST(Metadata, ParseErrors) {
  EXPECT_EQ(error_line([] { parse_metadata("id,x\n", "m"); }), 1u);
  EXPECT_EQ(error_line([] { parse_metadata("item_id,x\na,1,2\n", "m"); }), 2u);
  EXPECT_EQ(error_line([] { parse_metadata("item_id,x\na,1\na,2\n", "m"); }), 3u);
}

TEST(FilterRareLabels, DropsLabelsBelowMinCount) {
  const auto meta = table({"medium"}, {{"x"}, {"x"}, {"y"}});
  const auto out = filter_rare_labels(meta, "medium", 2);
  EXPECT_EQ(out.item_ids(), (std::vector<std::string>{"i0", "i1"}));
}

TEST(FilterRareLabels, MinCountOneDropsOnlyMissing) {
  const auto meta = table({"medium"}, {{"x"}, {std::nullopt}, {"y"}, {"z"}});
  const auto out = filter_rare_labels(meta, "medium", 1);
  EXPECT_EQ(out.item_ids(), (std::vector<std::string>{"i0", "i2", "i3"}));
  EXPECT_THROW(filter_rare_labels(meta, "medium", 0), InvariantError);
}

TEST(FilterRareLabels, ZipfTableMatchesCountingOracle) {
  Rng rng(2024);
  // Zipf(s=1) over 30 labels by inverse-CDF sampling.
  std::vector<double> cdf;
  double total = 0;
  for (int r = 1; r <= 30; ++r) cdf.push_back(total += 1.0 / r);
  std::vector<std::vector<std::optional<std::string>>> cells;
  for (int i = 0; i < 1000; ++i) {
    if (rng.uniform01() < 0.05) {
      cells.push_back({std::nullopt});
      continue;
    }
    const double u = rng.uniform01() * total;
    const auto label = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    cells.push_back({"L" + std::to_string(label)});
  }
  const auto meta = table({"type"}, cells);

  std::map<std::string, int> counts;
  for (const auto& c : cells) {
    if (c[0]) ++counts[*c[0]];
  }
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i][0] && counts[*cells[i][0]] >= 100) expected.push_back("i" + std::to_string(i));
  }
  ASSERT_FALSE(expected.empty());
  ASSERT_LT(expected.size(), 950u);
  EXPECT_EQ(filter_rare_labels(meta, "type", 100).item_ids(), expected);
}

TEST(DropIncomplete, Examples) {
  const std::vector<std::string> required{"artist", "medium"};
  const auto meta = table({"artist", "medium", "notes"},
                          {{"a1", "oil", std::nullopt}, {std::nullopt, "oil", "n"}});
  EXPECT_EQ(drop_incomplete(meta, required).item_ids(), (std::vector<std::string>{"i0"}));

  const auto complete = table({"artist", "medium"}, {{"a", "b"}, {"c", "d"}});
  const auto same = drop_incomplete(complete, required);
  EXPECT_EQ(same.item_ids(), complete.item_ids());
  EXPECT_EQ(same.attributes(), complete.attributes());
  EXPECT_THROW(drop_incomplete(complete, std::vector<std::string>{"year"}), NotFoundError);
}

std::vector<std::vector<std::optional<std::string>>> random_cells(Rng& rng, std::size_t rows,
                                                                  std::size_t cols,
                                                                  double missing) {
  std::vector<std::vector<std::optional<std::string>>> cells(rows);
  for (auto& row : cells) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng.uniform01() < missing) {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back("v" + std::to_string(rng.uniform_index(6)));
      }
    }
  }
  return cells;
}

TEST(DropIncomplete, MixedTableMatchesRowScan) {
  Rng rng(5);
  const auto cells = random_cells(rng, 300, 4, 0.15);
  const auto meta = table({"a", "b", "c", "d"}, cells);
  const std::vector<std::string> required{"a", "c"};
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i][0] && cells[i][2]) expected.push_back("i" + std::to_string(i));
  }
  EXPECT_EQ(drop_incomplete(meta, required).item_ids(), expected);
}

TEST(Cleaning, IdempotentAndNoRareLabelSurvives) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto meta = table({"a", "b", "c"}, random_cells(rng, 200, 3, 0.2));
    CleaningRules rules;
    rules.required = {"a", "b"};
    rules.rare_label_attributes = {"a"};
    rules.min_count = 30;
    const auto once = clean_metadata(meta, rules);
    const auto twice = clean_metadata(once, rules);
    EXPECT_EQ(once.item_ids(), twice.item_ids());

    std::map<std::string, int> counts;
    for (const auto& row : once.rows()) {
      ASSERT_TRUE(once.cell(row, "a") && once.cell(row, "b"));
      ++counts[*once.cell(row, "a")];
    }
    for (const auto& [label, n] : counts) EXPECT_GE(n, 30) << label;
  }
}

TEST(Cleaning, SparseAttributesDroppedFirst) {
  // Column "notes" is 75% empty; requiring it would otherwise wipe the table.
  const auto meta = table({"medium", "notes"},
                          {{"oil", std::nullopt}, {"oil", std::nullopt}, {"ink", std::nullopt},
                           {"ink", "x"}});
  CleaningRules rules;
  rules.max_missing_fraction = 0.5;
  rules.required = {"medium"};
  const auto out = clean_metadata(meta, rules);
  EXPECT_EQ(out.attributes(), (std::vector<std::string>{"medium"}));
  EXPECT_EQ(out.size(), 4u);
  EXPECT_THROW(drop_sparse_attributes(meta, 1.5), InvariantError);
}

TEST(SplitItems, TenItems) {
  std::vector<std::string> items;
  for (int i = 0; i < 10; ++i) items.push_back("it" + std::to_string(i));
  const auto s = split_items(items, {0.7, 0.2, 0.1}, 42);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 1u);
  const auto again = split_items(items, {0.7, 0.2, 0.1}, 42);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.validation, again.validation);
  EXPECT_EQ(s.test, again.test);
}

TEST(SplitItems, LargeCountFollowsFloorPlusRemainder) {
  const std::size_t n = 634508;
  std::vector<std::string> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) items.push_back(std::to_string(i));
  const auto s = split_items(items, {0.7, 0.2, 0.1}, 1);
  // floor(0.2 n) = 126901, floor(0.1 n) = 63450, train keeps the rest.
  EXPECT_EQ(s.validation.size(), 126901u);
  EXPECT_EQ(s.test.size(), 63450u);
  EXPECT_EQ(s.train.size(), 444157u);
}

TEST(SplitItems, PartitionIsExhaustiveAndDisjoint) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(10000);
    std::vector<std::string> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back("x" + std::to_string(i));
    const auto s = split_items(items, {0.7, 0.2, 0.1}, rng.next_u64());
    EXPECT_EQ(s.validation.size(), static_cast<std::size_t>(std::floor(n * 0.2 + 1e-9)));
    EXPECT_EQ(s.test.size(), static_cast<std::size_t>(std::floor(n * 0.1 + 1e-9)));
    std::vector<std::string> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::sort(items.begin(), items.end());
    EXPECT_EQ(all, items);
  }
}

TEST(SplitItems, SeedChangesAssignment) {
  std::vector<std::string> items;
  for (int i = 0; i < 100; ++i) items.push_back(std::to_string(i));
  EXPECT_NE(split_items(items, {0.7, 0.2, 0.1}, 1).test,
            split_items(items, {0.7, 0.2, 0.1}, 2).test);
}

TEST(SplitItems, Errors) {
  const std::vector<std::string> two{"a", "b"};
  EXPECT_THROW(split_items(two, {0.7, 0.2, 0.1}, 0), InvariantError);
  const std::vector<std::string> dup{"a", "b", "a"};
  EXPECT_THROW(split_items(dup, {0.7, 0.2, 0.1}, 0), InvariantError);
  const std::vector<std::string> ok{"a", "b", "c"};
  EXPECT_THROW(split_items(ok, {0.7, 0.2, 0.2}, 0), InvariantError);
  EXPECT_THROW(split_items(ok, {1.1, -0.1, 0.0}, 0), InvariantError);
}

TEST(BuildVocab, LexicographicOrder) {
  const auto meta = table({"medium"}, {{"oil"}, {"acrylic"}, {"oil"}, {std::nullopt}});
  const auto v = build_vocab(meta, "medium");
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.index_of("acrylic"), 0u);
  EXPECT_EQ(v.index_of("oil"), 1u);
  EXPECT_THROW(v.index_of("ink"), NotFoundError);
}

TEST(BuildVocab, SingleLabelAndManyTypes) {
  EXPECT_EQ(build_vocab(table({"t"}, {{"only"}}), "t").index_of("only"), 0u);

  std::vector<std::vector<std::optional<std::string>>> cells;
  for (int i = 0; i < 47 * 3; ++i) cells.push_back({"type" + std::to_string(i % 47)});
  const auto v = build_vocab(table({"t"}, cells), "t");
  EXPECT_EQ(v.size(), 47u);
  EXPECT_TRUE(std::is_sorted(v.labels().begin(), v.labels().end()));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.index_of(v.label(i)), i);
}

TEST(BuildVocab, EmptyAttributeIsAnError) {
  EXPECT_THROW(build_vocab(table({"t"}, {{std::nullopt}}), "t"), InvariantError);
}

}  // namespace
}  // namespace embrec
