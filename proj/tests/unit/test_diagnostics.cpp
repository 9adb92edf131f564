// Copyright 2026 The DiscRec Workbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "discrec/common.hpp"
#include "discrec/diagnostics/diagnostics.hpp"
#include "support/oracles.hpp"

namespace discrec::diagnostics {
namespace {

using recommender::Variant;

TEST(Norms, UnitVectorsGiveOnes) {
  std::vector<torch::Tensor> e;
  for (int i = 0; i < 5; ++i) {
    auto t = torch::randn({4, 6}, torch::kFloat64);
    e.push_back(t / t.norm(2, -1, true));
  }
  for (double v : mean_norm_by_index(e)) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_THROW(mean_norm_by_index({}), Error);
}

TEST(Norms, TwoItemHandFixture) {
  // Level 0: (3,4) and (0,0); level 1: (1,0) and (0,2).
  auto books = torch::tensor({{{3.0, 4.0}, {0.0, 0.0}}, {{1.0, 0.0}, {0.0, 2.0}}}, torch::kFloat64);
  tokenizer::IdMap ids{{"a", {{0, 0}}}, {"b", {{1, 1}}}};
  auto p = norm_by_index(ids, NormSource::kCode, nullptr, books);
  EXPECT_EQ(p.source, "code");
  ASSERT_EQ(p.values.size(), 2u);
  EXPECT_EQ(p.values[0], 2.5);
  EXPECT_EQ(p.values[1], 1.5);
  EXPECT_THROW(norm_by_index({}, NormSource::kCode, nullptr, books), Error);
  EXPECT_THROW(norm_by_index(ids, NormSource::kCode, nullptr), ConfigError);
  EXPECT_THROW(norm_by_index(ids, NormSource::kSemanticToken, nullptr), ConfigError);
}

TEST(Norms, SemanticProfileEqualsTokenTable) {
  std::mt19937_64 rng(1);
  auto ids = oracle::random_ids(10, 4, 4, rng);
  auto model = recommender::build_variant(oracle::tiny_config(Variant::kDiscRec, 4, 4));
  auto sem = norm_by_index(ids, NormSource::kSemanticToken, &model);
  EXPECT_EQ(sem.values.size(), 4u);
  EXPECT_EQ(sem.values, mean_norm_by_index(token_table_rows(model, ids)));
  auto col = norm_by_index(ids, NormSource::kCollaborativeToken, &model);
  EXPECT_EQ(col.source, "collaborative_token");
  EXPECT_NE(col.values, sem.values);
  for (double v : col.values) EXPECT_GE(v, 0.0);
  auto base = recommender::build_variant(oracle::tiny_config(Variant::kBaseline, 4, 4));
  EXPECT_THROW(norm_by_index(ids, NormSource::kCollaborativeToken, &base), ConfigError);
}

TEST(Spearman, KnownValues) {
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  // Ties: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  EXPECT_NEAR(spearman({1, 1, 2}, {1, 2, 3}), 0.8660254037844386, 1e-12);
  EXPECT_TRUE(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  EXPECT_NEAR(level_trend({"code", {4, 3, 2, 1}}), -1.0, 1e-15);
}

TEST(Heatmaps, AveragingOracles) {
  auto uniform = torch::full({2, 3, 5, 5}, 0.2, torch::kFloat64);
  auto u = average_heatmaps({uniform}, 3);
  EXPECT_LT((u.cropped[0] - 0.2).abs().max().item<double>(), 1e-15);
  EXPECT_EQ(u.crop, 3);
  EXPECT_FALSE(u.clamped);

  auto single = torch::softmax(torch::randn({1, 1, 4, 4}, torch::kFloat64), -1);
  EXPECT_TRUE(torch::allclose(average_heatmaps({single}, 4).full[0], single[0][0], 0, 1e-15));

  auto a = torch::softmax(torch::randn({1, 2, 6, 6}, torch::kFloat64), -1);
  auto b = torch::softmax(torch::randn({1, 2, 6, 6}, torch::kFloat64), -1);
  auto both = average_heatmaps({torch::cat({a, b})}, 28, CropAnchor::kEnd);
  auto expect = (a[0].mean(0) + b[0].mean(0)) / 2;
  EXPECT_LT((both.full[0] - expect).abs().max().item<double>(), 1e-15);
  EXPECT_TRUE(both.clamped);
  EXPECT_EQ(both.requested_crop, 28);
  EXPECT_EQ(both.crop, 6);
  EXPECT_LT((both.full[0].sum(-1) - 1).abs().max().item<double>(), 1e-12);

  auto end = average_heatmaps({a}, 2, CropAnchor::kEnd);
  EXPECT_TRUE(torch::equal(end.cropped[0], end.full[0].narrow(0, 4, 2).narrow(1, 4, 2)));
  EXPECT_THROW(average_heatmaps({a}, 0), ConfigError);
}

TEST(Heatmaps, FromModelAreRowStochastic) {
  std::mt19937_64 rng(2);
  auto ids = oracle::random_ids(12, 2, 4, rng);
  std::vector<std::string> items;
  for (const auto& [item, _] : ids) items.push_back(item);
  auto cfg = oracle::tiny_config(Variant::kDiscRec);
  cfg.backbone.layers = 2;
  auto model = recommender::build_variant(cfg);
  recommender::BatchBuilder builder(ids, 2, 4, 5);
  std::vector<data::Sample> samples{{"u", {items[0], items[1], items[2]}, items[3]},
                                    {"v", {items[4]}, items[5]}};
  auto h = attention_heatmaps(model, builder, samples);
  ASSERT_EQ(h.full.size(), 2u);
  for (const auto& m : h.full) {
    EXPECT_LT((m.sum(-1) - 1).abs().max().item<double>(), 1e-5);
    EXPECT_GE(m.min().item<double>(), 0.0);
    EXPECT_LE(m.max().item<double>(), 1.0);
  }
  EXPECT_TRUE(h.clamped);
  EXPECT_EQ(h.crop, 7);
}

TEST(Export, CsvRoundTripAndIdempotence) {
  auto m = torch::softmax(torch::randn({1, 1, 5, 5}, torch::kFloat64), -1);
  auto bundle = average_heatmaps({m, m, m}, 4);
  EXPECT_TRUE(torch::equal(matrix_from_csv(matrix_to_csv(bundle.cropped[0])), bundle.cropped[0]));
  std::vector<NormProfile> profiles{{"code", {1.5, 0.25}}, {"semantic_token", {2, 3}}};
  EXPECT_EQ(profile_to_csv(profiles[0]), "level,mean_norm\n1,1.5\n2,0.25\n");
  const auto dir = (std::filesystem::temp_directory_path() / "discrec_export_test").string();
  std::filesystem::remove_all(dir);
  auto files = export_profiles(profiles, bundle, dir, true);
  EXPECT_EQ(files.size(), 2u + 3u * 2u);
  std::map<std::string, std::string> first;
  for (const auto& f : files) first[f] = read_file(dir + "/" + f);
  export_profiles(profiles, bundle, dir, true);
  for (const auto& f : files) EXPECT_EQ(read_file(dir + "/" + f), first[f]) << f;
  EXPECT_EQ(first["heatmap_layer3.pgm"].substr(0, 2), "P5");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace discrec::diagnostics
