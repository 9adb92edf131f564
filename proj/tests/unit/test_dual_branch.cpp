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
#include <cstring>
#include <random>

#include "discrec/common.hpp"
#include "discrec/dual_branch/dual_branch.hpp"
#include "support/oracles.hpp"

namespace discrec::dual_branch {
namespace {

BranchOptions tiny_options(int dim = 8) {
  BranchOptions o;
  o.model_dim = dim;
  o.heads = 2;
  o.head_dim = 4;
  o.ffn_dim = 16;
  o.dropout = 0.0;
  o.gate_init_std = 0.5;
  return o;
}

DualBranch tiny_branch(BranchOptions o = tiny_options()) {
  torch::manual_seed(5);
  DualBranch m(o);
  m->to(torch::kFloat64);
  m->eval();
  return m;
}

torch::Tensor as_batch(const std::vector<std::int64_t>& tokens) {
  return torch::tensor(tokens, torch::kInt64).unsqueeze(0);
}

TEST(Ipe, InputPattern) {
  EXPECT_EQ(ipe_for_input(2, 4), (std::vector<int>{1, 2, 3, 4, 1, 2, 3, 4, 5}));
  EXPECT_EQ(ipe_for_input(0, 3), (std::vector<int>{4}));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int t = static_cast<int>(rng() % 20), l = 1 + static_cast<int>(rng() % 6);
    auto rows = ipe_for_input(t, l);
    ASSERT_EQ(rows.size(), static_cast<std::size_t>(l * t + 1));
    for (int i = 0; i < l * t; ++i) EXPECT_EQ(rows[static_cast<std::size_t>(i)], i % l + 1);
  }
}

TEST(Ipe, TargetPattern) {
  EXPECT_EQ(ipe_for_target(4), (std::vector<int>{6, 1, 2, 3, 4}));
  EXPECT_EQ(ipe_for_target(1), (std::vector<int>{3, 1}));
  for (int l = 1; l <= 8; ++l) EXPECT_EQ(ipe_for_target(l).size(), static_cast<std::size_t>(l + 1));
}

TEST(Membership, Examples) {
  std::vector<std::int64_t> enc{5, 6, 7, 8, 2};
  EXPECT_EQ(item_membership(enc, 2, Side::kEncoder), (std::vector<int>{0, 0, 1, 1, 1}));
  std::vector<std::int64_t> dec{1, 4, 9};
  EXPECT_EQ(item_membership(dec, 2, Side::kDecoder), (std::vector<int>{0, 0, 0}));
  std::vector<std::int64_t> padded{0, 0, 5, 6, 2};
  EXPECT_EQ(item_membership(padded, 2, Side::kEncoder), (std::vector<int>{-1, -1, 0, 0, 0}));
}

TEST(Mask, HandExamples) {
  auto one = item_local_mask(std::vector<int>{0, 0, 0, 0, 0}, false);
  EXPECT_EQ(one.abs().max().item<double>(), 0.0);
  std::vector<int> two{0, 0, 1, 1, 1};
  auto m = item_local_mask(two, false);
  EXPECT_EQ(m[0][1].item<double>(), 0.0);
  EXPECT_EQ(m[2][4].item<double>(), 0.0);
  EXPECT_TRUE(std::isinf(m[1][2].item<double>()));
  EXPECT_TRUE(torch::equal(m, m.t()));
  auto c = item_local_mask(std::vector<int>{0, 0, 0}, true);
  EXPECT_TRUE(oracle::same_mask(c, oracle::mask({0, 0, 0}, true)));
  EXPECT_TRUE(std::isinf(c[0][2].item<double>()));
}

TEST(Mask, RandomLayoutsMatchBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int t = static_cast<int>(rng() % 21), l = 1 + static_cast<int>(rng() % 6);
    const int pad = static_cast<int>(rng() % 4);
    for (bool decoder : {false, true}) {
      auto tokens = decoder ? oracle::decoder_tokens(pad, l, rng) : oracle::encoder_tokens(pad, t, l, rng);
      auto expected = oracle::membership(tokens, l, decoder);
      auto got = item_membership(tokens, l, decoder ? Side::kDecoder : Side::kEncoder);
      ASSERT_EQ(got, expected);
      auto w = oracle::mask(expected, decoder);
      EXPECT_TRUE(oracle::same_mask(item_local_mask(got, decoder), w));
      auto layout = make_layout(as_batch(tokens), l, decoder ? Side::kDecoder : Side::kEncoder);
      EXPECT_TRUE(oracle::same_mask(layout.mask[0][0], w));
    }
  }
}

TEST(Layout, IpeRowsSharedAcrossItems) {
  std::mt19937_64 rng(2);
  auto tokens = oracle::encoder_tokens(2, 3, 4, rng);
  auto layout = make_layout(as_batch(tokens), 4, Side::kEncoder);
  auto rows = layout.ipe_rows[0];
  EXPECT_EQ(rows[0].item<std::int64_t>(), -1);
  auto expected = ipe_for_input(3, 4);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(rows[static_cast<std::int64_t>(i + 2)].item<std::int64_t>(), expected[i] - 1);
  }
  auto table = torch::randn({6, 3}, torch::kFloat64);
  auto v = gather_ipe(table, layout)[0];
  EXPECT_EQ(v[0].abs().max().item<double>(), 0.0);
  EXPECT_TRUE(torch::equal(v[3], v[7]));
  EXPECT_TRUE(torch::equal(v[3], v[11]));
  auto dec = make_layout(as_batch({1, 5, 6, 7, 8}), 4, Side::kDecoder);
  EXPECT_EQ(dec.ipe_rows[0][0].item<std::int64_t>(), 5);
  EXPECT_THROW(gather_ipe(torch::zeros({3, 3}), dec), Error);
}

TEST(Attention, IdentityWhenEachTokenIsItsOwnItem) {
  auto q = torch::randn({1, 2, 5, 3}, torch::kFloat64);
  auto k = torch::randn({1, 2, 5, 3}, torch::kFloat64);
  auto v = torch::randn({1, 2, 5, 3}, torch::kFloat64);
  auto w = item_local_mask(std::vector<int>{0, 1, 2, 3, 4}, false).view({1, 1, 5, 5});
  auto r = nn::masked_attention(q, k, v, w);
  EXPECT_LT((r.output - v).abs().max().item<double>(), 1e-15);
}

TEST(Attention, ZeroScoresAverage) {
  auto z = torch::zeros({1, 1, 4, 2}, torch::kFloat64);
  auto v = torch::randn({1, 1, 4, 2}, torch::kFloat64);
  auto r = nn::masked_attention(z, z, v, torch::zeros({1, 1, 4, 4}, torch::kFloat64));
  auto mean = v.mean(2, true).expand_as(v);
  EXPECT_LT((r.output - mean).abs().max().item<double>(), 1e-15);
}

TEST(Attention, MatchesDenseOracle) {
  std::mt19937_64 rng(3);
  auto q = torch::randn({1, 1, 6, 3}, torch::kFloat64);
  auto k = torch::randn({1, 1, 6, 3}, torch::kFloat64);
  auto v = torch::randn({1, 1, 6, 3}, torch::kFloat64);
  std::vector<int> m{0, 0, 1, 1, 1, 2};
  auto w = oracle::mask(m, false);
  auto r = nn::masked_attention(q, k, v, item_local_mask(m, false).view({1, 1, 6, 6}));
  for (int i = 0; i < 6; ++i) {
    std::vector<double> s(6);
    double mx = -INFINITY;
    for (int j = 0; j < 6; ++j) {
      double dot = 0;
      for (int d = 0; d < 3; ++d) dot += q[0][0][i][d].item<double>() * k[0][0][j][d].item<double>();
      s[static_cast<std::size_t>(j)] = dot / std::sqrt(3.0) + w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      mx = std::max(mx, s[static_cast<std::size_t>(j)]);
    }
    double z = 0;
    for (auto& x : s) z += (x = std::exp(x - mx));
    for (int d = 0; d < 3; ++d) {
      double o = 0;
      for (int j = 0; j < 6; ++j) o += s[static_cast<std::size_t>(j)] / z * v[0][0][j][d].item<double>();
      EXPECT_NEAR(r.output[0][0][i][d].item<double>(), o, 1e-12);
    }
  }
}

TEST(SemanticBranch, ExactIdentity) {
  auto e = torch::randn({2, 7, 8}, torch::kFloat64);
  auto s = semantic_branch(e);
  EXPECT_EQ(s.sizes(), e.sizes());
  EXPECT_EQ(std::memcmp(s.data_ptr(), e.data_ptr(), static_cast<std::size_t>(e.numel()) * sizeof(double)), 0);
}

TEST(CollaborativeBranch, ZeroInputWithZeroProjectionsIsZero) {
  auto m = tiny_branch();
  {
    torch::NoGradGuard g;
    m->transformer()->attention()->out_proj()->weight.zero_();
    m->transformer()->attention()->out_proj()->bias.zero_();
    m->transformer()->ffn()->out_proj()->weight.zero_();
    m->transformer()->ffn()->out_proj()->bias.zero_();
  }
  auto layout = make_layout(as_batch({3, 4, 5, 6, 2}), 2, Side::kEncoder);
  auto zero = torch::zeros({1, 5, 8}, torch::kFloat64);
  EXPECT_EQ(m->collaborative(zero, zero, layout).abs().max().item<double>(), 0.0);
  EXPECT_THROW(m->collaborative(zero, torch::zeros({1, 4, 8}, torch::kFloat64), layout), Error);
}

TEST(CollaborativeBranch, ItemLocalityUnderPerturbation) {
  auto m = tiny_branch();
  std::mt19937_64 rng(21);
  const int l = 3;
  for (int trial = 0; trial < 20; ++trial) {
    for (bool decoder : {false, true}) {
      const int items = 4;
      std::vector<std::int64_t> tokens = decoder ? oracle::decoder_tokens(1, l, rng)
                                                 : oracle::encoder_tokens(1, items, l, rng);
      auto layout = make_layout(as_batch(tokens), l, decoder ? Side::kDecoder : Side::kEncoder);
      auto ipe = gather_ipe(torch::randn({l + 2, 8}, torch::kFloat64), layout);
      auto e = torch::randn({1, static_cast<std::int64_t>(tokens.size()), 8}, torch::kFloat64);
      auto base = m->collaborative(e, ipe, layout);
      auto member = layout.membership[0];
      if (decoder) {
        // Causal: perturbing a later position leaves earlier rows intact.
        auto e2 = e.clone();
        e2[0][-1] += torch::randn({8}, torch::kFloat64);
        auto out = m->collaborative(e2, ipe, layout);
        EXPECT_LT((out[0].narrow(0, 0, out.size(1) - 1) - base[0].narrow(0, 0, out.size(1) - 1))
                      .abs().max().item<double>(), 1e-12);
        continue;
      }
      const int j = static_cast<int>(rng() % items);
      auto e2 = e.clone();
      auto touched = member.eq(j);
      e2[0].index_put_({touched}, torch::randn({touched.sum().item<std::int64_t>(), 8}, torch::kFloat64));
      auto out = m->collaborative(e2, ipe, layout);
      auto keep = (~touched) & member.ne(kPadItem);
      EXPECT_LT((out[0].index({keep}) - base[0].index({keep})).abs().max().item<double>(), 1e-12);
    }
  }
}

TEST(CollaborativeBranch, IdenticalItemsGiveIdenticalRows) {
  auto m = tiny_branch();
  auto item = torch::randn({2, 8}, torch::kFloat64);
  auto e = torch::cat({item, item}).unsqueeze(0);
  // Two complete items with no trailing special.
  std::vector<int> member{0, 0, 1, 1};
  Layout layout;
  layout.membership = torch::tensor(std::vector<std::int64_t>{0, 0, 1, 1}).unsqueeze(0);
  layout.ipe_rows = torch::tensor(std::vector<std::int64_t>{0, 1, 0, 1}).unsqueeze(0);
  layout.pad = torch::zeros({1, 4}, torch::kBool);
  layout.mask = item_local_mask(member, false).view({1, 1, 4, 4});
  auto ipe = gather_ipe(torch::randn({4, 8}, torch::kFloat64), layout);
  auto out = m->collaborative(e, ipe, layout)[0];
  EXPECT_LT((out[0] - out[2]).abs().max().item<double>(), 1e-14);
  EXPECT_LT((out[1] - out[3]).abs().max().item<double>(), 1e-14);
}

TEST(Fuse, SymmetricCases) {
  auto b = torch::randn({3, 4}, torch::kFloat64);
  auto g = torch::randn({4}, torch::kFloat64);
  auto f = fuse(b, b, g, g);
  EXPECT_LT((f.output - b).abs().max().item<double>(), 1e-15);
  EXPECT_LT((f.weights - 0.5).abs().max().item<double>(), 1e-15);
  auto bs = torch::tensor({{1.0, 0.0}}, torch::kFloat64);
  auto bc = torch::tensor({{0.0, 2.0}}, torch::kFloat64);
  auto eq = fuse(bs, bc, torch::tensor({2.0, 0.0}, torch::kFloat64), torch::tensor({0.0, 1.0}, torch::kFloat64));
  EXPECT_LT((eq.weights - 0.5).abs().max().item<double>(), 1e-15);
}

TEST(Fuse, HandCase) {
  auto f = fuse(torch::tensor({{1.0, 0.0}}, torch::kFloat64), torch::tensor({{0.0, 1.0}}, torch::kFloat64),
                torch::tensor({1.0, 0.0}, torch::kFloat64), torch::tensor({2.0, 0.0}, torch::kFloat64));
  const double e = std::exp(1.0);
  const double s0 = e / (e + 1), s1 = 1 / (e + 1);
  EXPECT_NEAR(f.weights[0][0].item<double>(), s0, 1e-15);
  EXPECT_NEAR(f.weights[0][1].item<double>(), s1, 1e-15);
  EXPECT_NEAR(f.output[0][0].item<double>(), s0, 1e-15);
  EXPECT_NEAR(f.output[0][1].item<double>(), s1, 1e-15);
  EXPECT_THROW(fuse(torch::zeros({1, 2}), torch::zeros({2, 2}), torch::zeros({2}), torch::zeros({2})), Error);
}

TEST(Fuse, WeightsAreConvex) {
  auto f = fuse(torch::randn({500, 8}, torch::kFloat64) * 5, torch::randn({500, 8}, torch::kFloat64) * 5,
                torch::randn({8}, torch::kFloat64), torch::randn({8}, torch::kFloat64));
  EXPECT_LT((f.weights.sum(-1) - 1).abs().max().item<double>(), 1e-12);
  EXPECT_GE(f.weights.min().item<double>(), 0.0);
  EXPECT_LE(f.weights.max().item<double>(), 1.0);
}

TEST(DualBranchForward, ShapeAndForcedSemantic) {
  auto m = tiny_branch();
  std::mt19937_64 rng(4);
  auto tokens = oracle::encoder_tokens(2, 3, 2, rng);
  auto layout = make_layout(as_batch(tokens), 2, Side::kEncoder);
  auto e = torch::randn({1, static_cast<std::int64_t>(tokens.size()), 8}, torch::kFloat64);
  auto ipe = gather_ipe(torch::randn({4, 8}, torch::kFloat64), layout);
  auto out = m->forward(e, ipe, layout);
  EXPECT_EQ(out.fused.sizes(), e.sizes());
  EXPECT_TRUE(torch::equal(out.fused[0][0], e[0][0]));  // PAD passes through
  m->force_branch(0);
  EXPECT_TRUE(torch::equal(m->forward(e, ipe, layout).fused, e));
  m->force_branch(1);
  auto col = m->forward(e, ipe, layout);
  EXPECT_TRUE(torch::equal(col.fused[0].narrow(0, 2, 7), col.collaborative[0].narrow(0, 2, 7)));
}

TEST(DualBranchForward, MatchesComposition) {
  auto m = tiny_branch();
  std::mt19937_64 rng(6);
  for (bool decoder : {false, true}) {
    auto tokens = decoder ? oracle::decoder_tokens(0, 3, rng) : oracle::encoder_tokens(1, 2, 3, rng);
    auto layout = make_layout(as_batch(tokens), 3, decoder ? Side::kDecoder : Side::kEncoder);
    auto e = torch::randn({1, static_cast<std::int64_t>(tokens.size()), 8}, torch::kFloat64);
    auto ipe = gather_ipe(torch::randn({5, 8}, torch::kFloat64), layout);
    auto out = m->forward(e, ipe, layout).fused[0];
    auto col = m->transformer()->forward(e + ipe, layout.mask)[0];
    auto gs = m->gate_semantic().detach(), gc = m->gate_collaborative().detach();
    for (std::int64_t t = 0; t < e.size(1); ++t) {
      if (tokens[static_cast<std::size_t>(t)] == 0) continue;
      const double a = (e[0][t] * gs).sum().item<double>();
      const double b = (col[t] * gc).sum().item<double>();
      const double mx = std::max(a, b);
      const double s0 = std::exp(a - mx) / (std::exp(a - mx) + std::exp(b - mx));
      auto expect = s0 * e[0][t] + (1 - s0) * col[t];
      EXPECT_LT((out[t] - expect).abs().max().item<double>(), 1e-12);
    }
  }
}

TEST(DualBranchForward, FusionModes) {
  auto o = tiny_options();
  o.fusion = FusionMode::kSum;
  auto sum = tiny_branch(o);
  auto layout = make_layout(as_batch({3, 4, 2}), 2, Side::kEncoder);
  auto e = torch::randn({1, 3, 8}, torch::kFloat64);
  auto ipe = gather_ipe(torch::randn({4, 8}, torch::kFloat64), layout);
  auto out = sum->forward(e, ipe, layout);
  EXPECT_TRUE(torch::equal(out.fused, out.semantic + out.collaborative));

  o.fusion = FusionMode::kGate;
  o.use_transformer = false;
  auto plain = tiny_branch(o);
  EXPECT_TRUE(torch::equal(plain->collaborative(e, ipe, layout), e + ipe));

  o.use_transformer = true;
  o.token_average = true;
  auto avg = tiny_branch(o);
  auto c = avg->collaborative(e, ipe, layout)[0];
  EXPECT_LT((c[0] - c[2]).abs().max().item<double>(), 1e-14);

  o.token_average = false;
  o.fusion = FusionMode::kSelfGate;
  auto self = tiny_branch(o);
  EXPECT_EQ(self->forward(e, ipe, layout).fused.sizes(), e.sizes());
}

struct Probe : torch::nn::Module {
  Probe(DualBranch m, int tokens) : branch(register_module("branch", m)) {
    e = register_parameter("e", torch::randn({1, tokens, 8}, torch::kFloat64));
    table = register_parameter("ipe", torch::randn({4, 8}, torch::kFloat64));
    w = torch::randn({1, tokens, 8}, torch::kFloat64);
  }
  DualBranch branch;
  torch::Tensor e, table, w;
};

TEST(DualBranchForward, GradientsMatchFiniteDifferences) {
  auto m = tiny_branch();
  auto layout = make_layout(as_batch({0, 3, 4, 5, 6, 2}), 2, Side::kEncoder);
  Probe probe(m, 6);
  auto checks = oracle::finite_difference_check(probe, [&] {
    return (probe.branch->forward(probe.e, gather_ipe(probe.table, layout), layout).fused * probe.w).sum();
  });
  for (const auto& c : checks) EXPECT_TRUE(c.within(1e-3)) << c.name << " rel " << c.rel_error;
}

}  // namespace
}  // namespace discrec::dual_branch
