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

#include "discrec/dual_branch/dual_branch.hpp"

#include "discrec/common.hpp"

namespace discrec::dual_branch {

namespace {

constexpr std::int64_t kPadToken = 0;
constexpr std::int64_t kBosToken = 1;
constexpr std::int64_t kEosToken = 2;

}  // namespace

std::vector<int> ipe_for_input(int items, int levels) {
  if (items < 0 || levels < 1) throw Error("ipe_for_input: need T >= 0 and L >= 1");
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(items * levels + 1));
  for (int t = 0; t < items; ++t) {
    for (int l = 1; l <= levels; ++l) rows.push_back(l);
  }
  rows.push_back(levels + 1);
  return rows;
}

std::vector<int> ipe_for_target(int levels) {
  if (levels < 1) throw Error("ipe_for_target: need L >= 1");
  std::vector<int> rows{levels + 2};
  for (int l = 1; l <= levels; ++l) rows.push_back(l);
  return rows;
}

std::vector<int> item_membership(std::span<const std::int64_t> tokens, int levels, Side side) {
  std::vector<int> out(tokens.size(), kPadItem);
  if (side == Side::kDecoder) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] != kPadToken) out[i] = 0;
    }
    return out;
  }
  int code_pos = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto t = tokens[i];
    if (t == kPadToken) continue;
    if (t == kEosToken) {
      out[i] = code_pos == 0 ? 0 : (code_pos - 1) / levels;
    } else {
      out[i] = code_pos / levels;
      ++code_pos;
    }
  }
  return out;
}

torch::Tensor item_local_mask(std::span<const int> membership, bool causal) {
  const auto n = static_cast<std::int64_t>(membership.size());
  auto mask = torch::full({n, n}, nn::kNegInf, torch::kFloat64);
  auto acc = mask.accessor<double, 2>();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const int mi = membership[static_cast<std::size_t>(i)];
      const int mj = membership[static_cast<std::size_t>(j)];
      const bool same = mi != kPadItem && mi == mj && (!causal || j <= i);
      if (same || i == j) acc[i][j] = 0.0;
    }
  }
  return mask;
}

Layout make_layout(const torch::Tensor& tokens_in, int levels, Side side) {
  auto tokens = tokens_in.to(torch::kInt64).contiguous();
  const auto batch = tokens.size(0);
  const auto n = tokens.size(1);
  Layout layout;
  layout.causal = side == Side::kDecoder;
  layout.membership = torch::empty({batch, n}, torch::kInt64);
  layout.ipe_rows = torch::empty({batch, n}, torch::kInt64);
  auto macc = layout.membership.accessor<std::int64_t, 2>();
  auto racc = layout.ipe_rows.accessor<std::int64_t, 2>();
  const auto* base = tokens.data_ptr<std::int64_t>();
  for (std::int64_t b = 0; b < batch; ++b) {
    std::span<const std::int64_t> row(base + b * n, static_cast<std::size_t>(n));
    auto member = item_membership(row, levels, side);
    int code_pos = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      macc[b][i] = member[static_cast<std::size_t>(i)];
      const auto t = row[static_cast<std::size_t>(i)];
      if (t == kPadToken) {
        racc[b][i] = -1;
      } else if (t == kEosToken) {
        racc[b][i] = levels;
      } else if (t == kBosToken) {
        racc[b][i] = levels + 1;
      } else {
        racc[b][i] = code_pos % levels;
        ++code_pos;
      }
    }
  }
  layout.pad = tokens == kPadToken;
  auto m = layout.membership;
  auto valid = m.ne(kPadItem);
  auto allowed = m.unsqueeze(2).eq(m.unsqueeze(1)) & valid.unsqueeze(2) & valid.unsqueeze(1);
  if (layout.causal) allowed = allowed & torch::ones({n, n}, torch::kBool).tril().unsqueeze(0);
  allowed = allowed | torch::eye(n, torch::kBool).unsqueeze(0);
  layout.mask = torch::where(allowed, torch::zeros({}, torch::kFloat64),
                             torch::full({}, nn::kNegInf, torch::kFloat64))
                    .unsqueeze(1);
  auto w = allowed.to(torch::kFloat64);
  layout.average = w / w.sum(-1, /*keepdim=*/true);
  return layout;
}

torch::Tensor gather_ipe(const torch::Tensor& table, const Layout& layout) {
  const auto batch = layout.ipe_rows.size(0);
  const auto n = layout.ipe_rows.size(1);
  if (layout.ipe_rows.numel() > 0 && layout.ipe_rows.max().item<std::int64_t>() >= table.size(0)) {
    throw Error("gather_ipe: IPE table has too few rows for this layout");
  }
  auto rows = table.index_select(0, layout.ipe_rows.clamp_min(0).flatten()).view({batch, n, table.size(1)});
  return rows * (~layout.pad).unsqueeze(-1).to(table.scalar_type());
}

BranchTransformerImpl::BranchTransformerImpl(const BranchOptions& options) : options_(options) {
  norm1_ = register_module("norm1", nn::RmsNorm(options.model_dim));
  norm2_ = register_module("norm2", nn::RmsNorm(options.model_dim));
  attn_ = register_module("attn", nn::MultiHeadAttention(nn::AttentionOptions{
                                      options.model_dim, options.heads, options.head_dim,
                                      options.dropout, /*bias=*/true}));
  ffn_ = register_module("ffn", nn::FeedForward(options.model_dim, options.ffn_dim,
                                                options.dropout, /*bias=*/true));
  dropout_ = register_module("dropout", torch::nn::Dropout(options.dropout));
  if (options.single_query) {
    query_ = register_parameter("query", torch::randn({options.model_dim}) * 0.02);
  }
}

torch::Tensor BranchTransformerImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  auto h = norm1_->forward(x);
  torch::Tensor queries;
  if (options_.single_query) {
    queries = attn_->project_queries(query_.view({1, 1, -1}))
                  .expand({x.size(0), options_.heads, x.size(1), options_.head_dim});
  }
  auto a = attn_->forward(h, h, mask.to(x.scalar_type()), {}, queries).output;
  auto y = x + dropout_->forward(a);
  return y + dropout_->forward(ffn_->forward(norm2_->forward(y)));
}

namespace {

Fusion fuse_impl(const torch::Tensor& semantic, const torch::Tensor& collaborative,
                 const torch::Tensor& gate_semantic, const torch::Tensor& gate_collaborative,
                 std::optional<int> forced) {
  if (semantic.sizes() != collaborative.sizes()) throw Error("fuse: branch shapes differ");
  auto s_sem = (semantic * gate_semantic).sum(-1);
  auto s_col = (collaborative * gate_collaborative).sum(-1);
  if (forced) {
    auto neg = torch::full_like(s_sem, nn::kNegInf);
    if (*forced == 0) s_col = neg;
    if (*forced == 1) s_sem = neg;
  }
  auto weights = torch::softmax(torch::stack({s_sem, s_col}, -1), -1);
  auto w0 = weights.select(-1, 0).unsqueeze(-1);
  auto w1 = weights.select(-1, 1).unsqueeze(-1);
  return {w0 * semantic + w1 * collaborative, weights};
}

}  // namespace

Fusion fuse(const torch::Tensor& semantic, const torch::Tensor& collaborative,
            const torch::Tensor& gate_semantic, const torch::Tensor& gate_collaborative) {
  return fuse_impl(semantic, collaborative, gate_semantic, gate_collaborative, std::nullopt);
}

DualBranchImpl::DualBranchImpl(const BranchOptions& options) : options_(options) {
  if (options.use_transformer) {
    transformer_ = register_module("transformer", BranchTransformer(options));
  }
  if (options.fusion == FusionMode::kGate) {
    gate_semantic_ = register_parameter(
        "gate_semantic", torch::randn({options.model_dim}) * options.gate_init_std);
    gate_collaborative_ = register_parameter(
        "gate_collaborative", torch::randn({options.model_dim}) * options.gate_init_std);
  }
  if (options.fusion == FusionMode::kSelfGate) {
    self_gate_ = register_module(
        "self_gate", torch::nn::Linear(2 * options.model_dim, 2 * options.model_dim));
  }
}

torch::Tensor DualBranchImpl::collaborative(const torch::Tensor& embeddings, const torch::Tensor& ipe,
                                            const Layout& layout) {
  if (embeddings.sizes() != ipe.sizes()) {
    throw Error("collaborative branch: embeddings and IPE rows differ in shape");
  }
  auto x = embeddings + ipe;
  if (options_.use_transformer) x = transformer_->forward(x, layout.mask);
  if (options_.token_average) x = torch::matmul(layout.average.to(x.scalar_type()), x);
  return x;
}

BranchOutputs DualBranchImpl::forward(const torch::Tensor& embeddings, const torch::Tensor& ipe,
                                      const Layout& layout) {
  BranchOutputs out;
  out.semantic = semantic_branch(embeddings);
  out.collaborative = collaborative(embeddings, ipe, layout);
  switch (options_.fusion) {
    case FusionMode::kGate: {
      auto f = fuse_impl(out.semantic, out.collaborative, gate_semantic_, gate_collaborative_, forced_);
      out.fused = f.output;
      out.weights = f.weights;
      break;
    }
    case FusionMode::kSum:
      out.fused = out.semantic + out.collaborative;
      break;
    case FusionMode::kSelfGate: {
      auto g = torch::sigmoid(self_gate_->forward(torch::cat({out.semantic, out.collaborative}, -1)));
      const auto d = options_.model_dim;
      out.fused = g.narrow(-1, 0, d) * out.semantic + g.narrow(-1, d, d) * out.collaborative;
      break;
    }
  }
  out.fused = torch::where(layout.pad.unsqueeze(-1), embeddings, out.fused);
  return out;
}

}  // namespace discrec::dual_branch
