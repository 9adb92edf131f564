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

#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "discrec/common.hpp"
#include "discrec/serialization.hpp"
#include "discrec/tokenizer/kmeans.hpp"
#include "discrec/tokenizer/rqvae.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"

namespace discrec::tokenizer {
namespace {

RqVaeConfig small_config(int input_dim, int levels, int k, int code_dim) {
  RqVaeConfig c;
  c.input_dim = input_dim;
  c.levels = levels;
  c.codebook_size = k;
  c.code_dim = code_dim;
  c.hidden_layers = 1;
  c.seed = 1;
  c.dtype = torch::kFloat64;
  return c;
}

TEST(RqVaeConfig, PaperDefaults) {
  RqVaeConfig c;
  EXPECT_EQ(c.levels, 4);
  EXPECT_EQ(c.codebook_size, 256);
  EXPECT_EQ(c.code_dim, 32);
  EXPECT_DOUBLE_EQ(c.beta, 0.25);
  EXPECT_EQ(c.steps, 20000);
  EXPECT_EQ(c.batch_size, 1024);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.weight_decay, 1e-4);
  c.input_dim = 96;
  EXPECT_EQ(c.resolved_hidden(), (std::vector<int>{80, 64, 48}));
}

TEST(Encoder, ZeroWeightsGiveZero) {
  RqVae m(small_config(6, 2, 4, 3));
  {
    torch::NoGradGuard g;
    for (auto& p : m->encoder()->parameters()) p.zero_();
  }
  EXPECT_EQ(m->encode(torch::randn({5, 6}, torch::kFloat64)).abs().max().item<double>(), 0.0);
  EXPECT_THROW(m->encode(torch::randn({5, 7}, torch::kFloat64)), Error);
  EXPECT_THROW(m->decode(torch::randn({5, 4}, torch::kFloat64)), Error);
}

TEST(Encoder, MatchesExplicitMatrixOracle) {
  RqVae m(small_config(6, 2, 4, 3));
  auto z = torch::randn({4, 6}, torch::kFloat64);
  auto layers = m->encoder()->modules(false);
  std::vector<torch::Tensor> w, b;
  for (auto& p : m->encoder()->named_parameters()) {
    (p.key().find("weight") != std::string::npos ? w : b).push_back(p.value().detach());
  }
  ASSERT_EQ(w.size(), 2u);
  auto h = torch::clamp_min(torch::matmul(z, w[0].t()) + b[0], 0.0);
  auto r = torch::matmul(h, w[1].t()) + b[1];
  EXPECT_LT((m->encode(z) - r).abs().max().item<double>(), 1e-12);

  auto rd = torch::randn({4, 3}, torch::kFloat64);
  std::vector<torch::Tensor> dw, db;
  for (auto& p : m->decoder()->named_parameters()) {
    (p.key().find("weight") != std::string::npos ? dw : db).push_back(p.value().detach());
  }
  auto dh = torch::clamp_min(torch::matmul(rd, dw[0].t()) + db[0], 0.0);
  EXPECT_LT((m->decode(rd) - (torch::matmul(dh, dw[1].t()) + db[1])).abs().max().item<double>(), 1e-12);
}

TEST(Encoder, LinearMapWithoutHiddenLayers) {
  auto c = small_config(3, 1, 2, 3);
  c.hidden_layers = 0;
  RqVae m(c);
  auto lin = m->encoder()->ptr<torch::nn::LinearImpl>(0);
  {
    torch::NoGradGuard g;
    lin->weight.copy_(torch::eye(3, torch::kFloat64));
    lin->bias.zero_();
  }
  auto z = torch::randn({2, 3}, torch::kFloat64);
  EXPECT_TRUE(torch::equal(m->encode(z), z));
}

TEST(Quantize, ExactMatchTelescopes) {
  const int levels = 3, k = 5, d = 4;
  auto books = torch::randn({levels, k, d}, torch::kFloat64);
  books[1][0].zero_();
  books[2][0].zero_();
  auto r = books[0][3].clone().unsqueeze(0);
  auto q = quantize(r, books);
  EXPECT_EQ(q.codes[0][0].item<std::int64_t>(), 3);
  EXPECT_EQ(q.codes[0][1].item<std::int64_t>(), 0);
  EXPECT_EQ(q.codes[0][2].item<std::int64_t>(), 0);
  EXPECT_EQ(q.residuals[0][1].abs().max().item<double>(), 0.0);
  EXPECT_TRUE(torch::equal(q.r_hat, r));
}

TEST(Quantize, TiesGoToLowestIndex) {
  auto books = torch::zeros({1, 6, 2}, torch::kFloat64);
  for (int i = 0; i < 6; ++i) books[0][i].fill_(10.0 + i);
  books[0][2] = torch::tensor({1.0, 1.0}, torch::kFloat64);
  books[0][5] = torch::tensor({1.0, 1.0}, torch::kFloat64);
  auto q = quantize(torch::tensor({{1.0, 1.0}}, torch::kFloat64), books);
  EXPECT_EQ(q.codes[0][0].item<std::int64_t>(), 2);
  EXPECT_THROW(quantize(torch::zeros({1, 2}), torch::zeros({1, 0, 2})), Error);
}

TEST(Quantize, MatchesPerLevelLinearScan) {
  std::mt19937_64 rng(2);
  auto books = torch::randn({2, 4, 2}, torch::kFloat64);
  auto r = torch::randn({50, 2}, torch::kFloat64);
  auto q = quantize(r, books);
  auto bacc = books.accessor<double, 3>();
  for (std::int64_t i = 0; i < 50; ++i) {
    double v[2] = {r[i][0].item<double>(), r[i][1].item<double>()};
    for (int l = 0; l < 2; ++l) {
      int best = 0;
      double best_d = INFINITY;
      for (int c = 0; c < 4; ++c) {
        const double dd = std::pow(v[0] - bacc[l][c][0], 2) + std::pow(v[1] - bacc[l][c][1], 2);
        if (dd < best_d) { best_d = dd; best = c; }
      }
      EXPECT_EQ(q.codes[i][l].item<std::int64_t>(), best);
      v[0] -= bacc[l][best][0];
      v[1] -= bacc[l][best][1];
    }
  }
}

TEST(Quantize, IdempotentOnCodebookSums) {
  auto books = torch::zeros({2, 3, 2}, torch::kFloat64);
  books[0][0] = torch::tensor({10.0, 0.0}, torch::kFloat64);
  books[0][1] = torch::tensor({0.0, 10.0}, torch::kFloat64);
  books[0][2] = torch::tensor({-10.0, 0.0}, torch::kFloat64);
  books[1][0] = torch::tensor({1.0, 0.0}, torch::kFloat64);
  books[1][1] = torch::tensor({0.0, 1.0}, torch::kFloat64);
  books[1][2] = torch::tensor({-1.0, -1.0}, torch::kFloat64);
  auto r = (books[0][1] + books[1][2]).unsqueeze(0);
  auto q = quantize(r, books);
  auto again = quantize(q.r_hat, books);
  EXPECT_TRUE(torch::equal(q.codes, again.codes));
  EXPECT_TRUE(torch::equal(q.r_hat, r));
}

TEST(Loss, HandCase) {
  auto z = torch::tensor({{1.0, 0.0}}, torch::kFloat64);
  auto zh = torch::zeros({1, 2}, torch::kFloat64);
  auto v = torch::tensor({{{0.5, 0.0}}}, torch::kFloat64);
  auto e = torch::zeros({1, 1, 2}, torch::kFloat64);
  auto l = tokenization_loss(z, zh, v, e, 0.25);
  EXPECT_NEAR(l.total.item<double>(), 1.3125, 1e-15);
  EXPECT_NEAR(l.reconstruction.item<double>(), 1.0, 1e-15);
  EXPECT_NEAR(l.codebook.item<double>(), 0.25, 1e-15);
  EXPECT_NEAR(l.commitment.item<double>(), 0.0625, 1e-15);
  auto perfect = tokenization_loss(z, z, e, e, 0.25);
  EXPECT_EQ(perfect.total.item<double>(), 0.0);
}

TEST(Loss, StopGradientRoutesTermsToTheirOwners) {
  RqVae m(small_config(4, 2, 3, 2));
  auto z = torch::randn({6, 4}, torch::kFloat64);
  auto out = m->forward(z);
  auto enc_params = m->encoder()->parameters();
  auto grads = [&](const torch::Tensor& term) {
    std::vector<torch::Tensor> inputs = enc_params;
    inputs.push_back(m->codebooks());
    return torch::autograd::grad({term}, inputs, {}, /*retain_graph=*/true, false, /*allow_unused=*/true);
  };
  auto norm = [](const torch::Tensor& t) { return t.defined() ? t.abs().max().item<double>() : 0.0; };
  auto g_cb = grads(out.loss.codebook);
  for (std::size_t i = 0; i < enc_params.size(); ++i) EXPECT_EQ(norm(g_cb[i]), 0.0);
  EXPECT_GT(norm(g_cb.back()), 0.0);
  auto g_commit = grads(out.loss.commitment);
  EXPECT_EQ(norm(g_commit.back()), 0.0);
  double enc_total = 0.0;
  for (std::size_t i = 0; i < enc_params.size(); ++i) enc_total += norm(g_commit[i]);
  EXPECT_GT(enc_total, 0.0);
  // Reconstruction reaches the encoder through the straight-through path.
  auto g_rec = grads(out.loss.reconstruction);
  double rec_enc = 0.0;
  for (std::size_t i = 0; i < enc_params.size(); ++i) rec_enc += norm(g_rec[i]);
  EXPECT_GT(rec_enc, 0.0);
}

TEST(Train, SingleItemSingleCodeFits) {
  auto c = small_config(4, 1, 1, 4);
  c.steps = 500;
  c.batch_size = 1;
  c.lr = 1e-2;
  c.weight_decay = 0.0;
  RqVae m(c);
  auto z = torch::tensor({{0.3, -1.2, 0.7, 2.0}}, torch::kFloat64);
  train_tokenizer(m, z);
  auto out = m->forward(m->normalize(z));
  EXPECT_LT(out.loss.reconstruction.item<double>(), 1e-3);
}

TEST(Train, FixedSeedReproducesLoss) {
  auto c = small_config(6, 2, 4, 3);
  c.steps = 60;
  c.batch_size = 8;
  c.dtype = torch::kFloat32;
  auto z = torch::randn({20, 6});
  RqVae a(c), b(c);
  EXPECT_EQ(train_tokenizer(a, z).final_loss, train_tokenizer(b, z).final_loss);
}

TEST(Train, NonFiniteInputAborts) {
  auto c = small_config(2, 1, 2, 2);
  c.steps = 3;
  c.standardize = false;
  c.kmeans_init = false;
  RqVae m(c);
  auto z = torch::tensor({{1.0, std::numeric_limits<double>::quiet_NaN()}, {0.0, 1.0}}, torch::kFloat64);
  EXPECT_THROW(train_tokenizer(m, z), NumericError);
}

double adjusted_rand(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::map<std::pair<std::int64_t, std::int64_t>, double> nij;
  std::map<std::int64_t, double> ai, bj;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nij[{a[i], b[i]}] += 1;
    ai[a[i]] += 1;
    bj[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (auto& [k, v] : nij) index += c2(v);
  for (auto& [k, v] : ai) sa += c2(v);
  for (auto& [k, v] : bj) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  return (index - expected) / (0.5 * (sa + sb) - expected);
}

TEST(Train, FourClusterCodesAgreeWithKMeans) {
  torch::manual_seed(0);
  auto centers = torch::randn({4, 8}, torch::kFloat64) * 6.0;
  std::vector<torch::Tensor> rows;
  for (int i = 0; i < 80; ++i) rows.push_back(centers[i % 4] + 0.3 * torch::randn({8}, torch::kFloat64));
  auto z = torch::stack(rows);
  auto c = small_config(8, 1, 4, 4);
  c.steps = 400;
  c.batch_size = 80;
  c.lr = 3e-3;
  RqVae m(c);
  train_tokenizer(m, z);
  auto codes = m->quantize(m->encode(m->normalize(z))).codes.select(1, 0).contiguous();
  auto km = kmeans(z, 4, 100, 3);
  std::vector<std::int64_t> a(codes.data_ptr<std::int64_t>(), codes.data_ptr<std::int64_t>() + 80);
  auto lab = km.labels.contiguous();
  std::vector<std::int64_t> b(lab.data_ptr<std::int64_t>(), lab.data_ptr<std::int64_t>() + 80);
  EXPECT_GE(adjusted_rand(a, b), 0.9);
}

TEST(KMeans, RecoversPlantedClustersDeterministically) {
  torch::manual_seed(4);
  auto centers = torch::tensor({{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}, torch::kFloat64);
  std::vector<torch::Tensor> rows;
  std::vector<std::int64_t> truth;
  for (int i = 0; i < 60; ++i) {
    rows.push_back(centers[i % 3] + 0.5 * torch::randn({2}, torch::kFloat64));
    truth.push_back(i % 3);
  }
  auto pts = torch::stack(rows);
  auto a = kmeans(pts, 3, 50, 9);
  auto b = kmeans(pts, 3, 50, 9);
  EXPECT_TRUE(torch::equal(a.labels, b.labels));
  auto lab = a.labels.contiguous();
  std::vector<std::int64_t> got(lab.data_ptr<std::int64_t>(), lab.data_ptr<std::int64_t>() + 60);
  EXPECT_DOUBLE_EQ(adjusted_rand(got, truth), 1.0);
  auto few = kmeans(pts.narrow(0, 0, 2), 4, 10, 1);
  EXPECT_EQ(few.centroids.size(0), 4);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = (dir / "discrec_rqvae_a.ckpt").string();
  const auto p2 = (dir / "discrec_rqvae_b.ckpt").string();
  auto c = small_config(5, 2, 3, 2);
  c.steps = 5;
  c.batch_size = 4;
  RqVae m(c);
  train_tokenizer(m, torch::randn({7, 5}, torch::kFloat64));
  save_rqvae(p1, m);
  auto loaded = load_rqvae(p1);
  save_rqvae(p2, loaded);
  EXPECT_EQ(read_file(p1), read_file(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Collisions, DistantItemsKeepRawCodes) {
  auto codes = torch::tensor({{0, 1}, {1, 0}, {2, 2}}, torch::kInt64);
  auto res = torch::zeros({3, 2});
  auto book = torch::randn({3, 2});
  auto a = resolve_collisions({"a", "b", "c"}, codes, res, book);
  EXPECT_TRUE(a.report.reassigned.empty());
  EXPECT_EQ(a.ids.at("b").codes, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.report.collision_rate(), 0.0);
}

TEST(Collisions, SecondItemGetsNearestUnusedCode) {
  auto codes = torch::tensor({{1, 0}, {1, 0}, {1, 0}}, torch::kInt64);
  auto book = torch::tensor({{0.0}, {5.0}, {1.0}}, torch::kFloat64);
  auto res = torch::tensor({{0.1}, {0.1}, {0.1}}, torch::kFloat64);
  auto a = resolve_collisions({"x", "y", "z"}, codes, res, book);
  // distance order from 0.1: code 0, code 2, code 1
  EXPECT_EQ(a.ids.at("x").codes, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.ids.at("y").codes, (std::vector<int>{1, 2}));
  EXPECT_EQ(a.ids.at("z").codes, (std::vector<int>{1, 1}));
  EXPECT_EQ(a.report.reassigned.size(), 2u);
  EXPECT_DOUBLE_EQ(a.report.collision_rate(), 2.0 / 3.0);
}

TEST(Collisions, OverflowIsReportedUnassignable) {
  auto codes = torch::zeros({4, 1}, torch::kInt64);
  auto book = torch::tensor({{0.0}, {1.0}}, torch::kFloat64);
  auto a = resolve_collisions({"a", "b", "c", "d"}, codes, torch::zeros({4, 1}, torch::kFloat64), book);
  EXPECT_EQ(a.ids.size(), 2u);
  EXPECT_EQ(a.report.unassignable, (std::vector<std::string>{"c", "d"}));
  EXPECT_DOUBLE_EQ(a.report.collision_rate(), 3.0 / 4.0);
}

TEST(AssignIds, IdenticalEmbeddingsGetDistinctIds) {
  auto c = small_config(3, 2, 4, 2);
  RqVae m(c);
  data::EmbeddingTable t{{"a", {1, 2, 3}}, {"b", {1, 2, 3}}, {"c", {-3, 0, 1}}};
  auto a = assign_ids({"a", "b", "c"}, t, m);
  EXPECT_EQ(a.ids.size(), 3u);
  EXPECT_NE(a.ids.at("a"), a.ids.at("b"));
  EXPECT_EQ(a.ids.at("a").codes.front(), a.ids.at("b").codes.front());
  PrefixTree tree(a.ids, 2);
  EXPECT_EQ(tree.size(), 3u);
}

TEST(IdMap, JsonlRoundTrip) {
  IdMap ids{{"a", {{1, 2}}}, {"b", {{0, 3}}}};
  EXPECT_EQ(id_map_from_jsonl(id_map_to_jsonl(ids)), ids);
  EXPECT_THROW(id_map_from_jsonl("{\"item\": 3}\n"), Error);
}

TEST(PrefixTree, SingleItemAndChildren) {
  PrefixTree one(IdMap{{"a", {{2, 1, 3}}}}, 3);
  EXPECT_EQ(one.children({}), (std::vector<int>{2}));
  EXPECT_EQ(one.children({2}), (std::vector<int>{1}));
  EXPECT_EQ(one.lookup({2, 1, 3}), "a");
  EXPECT_TRUE(one.children({2, 1, 3}).empty());
  EXPECT_TRUE(one.children({5}).empty());
}

TEST(PrefixTree, AgreesWithLinearScan) {
  std::mt19937_64 rng(8);
  IdMap ids;
  std::uniform_int_distribution<int> code(0, 5);
  for (int i = 0; i < 60; ++i) {
    SemanticId id{{code(rng), code(rng), code(rng)}};
    bool dup = false;
    for (auto& [k, v] : ids) dup = dup || v == id;
    if (!dup) ids["i" + std::to_string(i)] = id;
  }
  PrefixTree tree(ids, 3);
  std::set<int> first;
  for (auto& [k, v] : ids) first.insert(v.codes[0]);
  auto kids = tree.children({});
  EXPECT_EQ(std::set<int>(kids.begin(), kids.end()), first);
  for (int probe = 0; probe < 1000; ++probe) {
    SemanticId id{{code(rng), code(rng), code(rng)}};
    bool linear = false;
    for (auto& [k, v] : ids) linear = linear || v == id;
    EXPECT_EQ(tree.contains(id), linear);
  }
  EXPECT_THROW(tree.insert(ids.begin()->second, "dup"), Error);
}

TEST(Tokens, VocabularyLayoutAndBijection) {
  TokenVocabulary v(4, 256);
  EXPECT_EQ(v.size(), 3 + 4 * 256);
  EXPECT_EQ(v.token(0, 0), 3);
  EXPECT_EQ(v.token(2, 5), 3 + 2 * 256 + 5);
  for (std::int64_t t = 3; t < v.size(); ++t) {
    auto [l, c] = v.level_code(t);
    EXPECT_EQ(v.token(l, c), t);
  }
  EXPECT_FALSE(v.is_code(TokenVocabulary::kEos));
}

TEST(Tokens, SequenceAndTargetRoundTrip) {
  IdMap ids{{"a", {{1, 2, 3, 0}}}, {"b", {{0, 0, 1, 1}}}};
  TokenVocabulary v(4, 4);
  auto x = tokenize_sequence({"a", "b"}, ids, v);
  EXPECT_EQ(x.size(), 8u);
  EXPECT_TRUE(tokenize_sequence({}, ids, v).empty());
  EXPECT_THROW(tokenize_target("zzz", ids, v), Error);
  PrefixTree tree(ids, 4);
  EXPECT_EQ(detokenize(tokenize_target("b", ids, v), tree, v), "b");
}

}  // namespace
}  // namespace discrec::tokenizer
