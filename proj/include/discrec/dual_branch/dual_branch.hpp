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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "discrec/nn/layers.hpp"

namespace discrec::dual_branch {

enum class Side { kEncoder, kDecoder };

// 1-based IPE row indices: rows 1..L are within-item positions, L+1 is EOS
// and L+2 is BOS.
std::vector<int> ipe_for_input(int items, int levels);
std::vector<int> ipe_for_target(int levels);

inline constexpr int kPadItem = -1;

// Item index of every token of a (left-padded) token sequence. Encoder:
// PAD* codes EOS, where code position p (counted from the first code) maps to
// item p / L and EOS joins the last item. Decoder: BOS and the target codes
// all belong to item 0. PAD maps to kPadItem. Token ids follow
// TokenVocabulary (PAD=0, BOS=1, EOS=2).
std::vector<int> item_membership(std::span<const std::int64_t> tokens, int levels, Side side);

// Additive mask over one sequence: 0 where tokens share an item (and j <= i
// when causal), -inf elsewhere. PAD rows/columns are -inf except the diagonal.
torch::Tensor item_local_mask(std::span<const int> membership, bool causal);

// Batched layout derived from token ids [B, N].
struct Layout {
  torch::Tensor membership;  // [B, N] int64
  torch::Tensor ipe_rows;    // [B, N] int64, 0-based table rows; -1 for PAD
  torch::Tensor pad;         // [B, N] bool
  torch::Tensor mask;        // [B, 1, N, N] additive item-local mask
  torch::Tensor average;     // [B, N, N] row-normalised item-local averaging weights
  bool causal = false;
};
Layout make_layout(const torch::Tensor& tokens, int levels, Side side);

// Gathers IPE rows for a layout; PAD positions get zero vectors.
torch::Tensor gather_ipe(const torch::Tensor& table, const Layout& layout);

enum class FusionMode { kGate, kSum, kSelfGate };

struct BranchOptions {
  int model_dim = 128;
  int heads = 2;
  int head_dim = 64;
  int ffn_dim = 1024;
  double dropout = 0.1;
  bool use_transformer = true;   // false: B_colla = E + V
  bool single_query = false;     // learned query replaces per-token queries
  bool token_average = false;    // average branch output within each item
  FusionMode fusion = FusionMode::kGate;
  double gate_init_std = 0.02;
};

// One attention block (item-local multi-head self-attention + feed-forward,
// pre-RMSNorm residuals) with its own parameters.
class BranchTransformerImpl : public torch::nn::Module {
 public:
  explicit BranchTransformerImpl(const BranchOptions& options);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

  nn::MultiHeadAttention& attention() { return attn_; }
  nn::FeedForward& ffn() { return ffn_; }
  const torch::Tensor& query() const { return query_; }

 private:
  BranchOptions options_;
  nn::RmsNorm norm1_{nullptr}, norm2_{nullptr};
  nn::MultiHeadAttention attn_{nullptr};
  nn::FeedForward ffn_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
  torch::Tensor query_;  // [D], single-query mode only
};
TORCH_MODULE(BranchTransformer);

inline torch::Tensor semantic_branch(const torch::Tensor& embeddings) { return embeddings; }

struct Fusion {
  torch::Tensor output;   // [..., N, D]
  torch::Tensor weights;  // [..., N, 2]; (semantic, collaborative)
};

// s = softmax([B_s . G_s, B_c . G_c]) per token; output = s0 B_s + s1 B_c.
Fusion fuse(const torch::Tensor& semantic, const torch::Tensor& collaborative,
            const torch::Tensor& gate_semantic, const torch::Tensor& gate_collaborative);

struct BranchOutputs {
  torch::Tensor fused;
  torch::Tensor semantic;
  torch::Tensor collaborative;
  torch::Tensor weights;  // defined for gate fusion only
};

// Dual-branch module M for one side (encoder or decoder).
class DualBranchImpl : public torch::nn::Module {
 public:
  explicit DualBranchImpl(const BranchOptions& options);

  // B_colla = Transformer(E + V) under the item-local mask (or E + V when the
  // transformer is disabled), optionally item-averaged.
  torch::Tensor collaborative(const torch::Tensor& embeddings, const torch::Tensor& ipe,
                              const Layout& layout);
  // Full M(E, V); PAD positions pass through unchanged.
  BranchOutputs forward(const torch::Tensor& embeddings, const torch::Tensor& ipe,
                        const Layout& layout);

  // Test hook: 0 forces the semantic branch, 1 the collaborative branch, by
  // sending the other branch's gate score to -inf.
  void force_branch(std::optional<int> branch) { forced_ = branch; }

  const BranchOptions& options() const { return options_; }
  torch::Tensor& gate_semantic() { return gate_semantic_; }
  torch::Tensor& gate_collaborative() { return gate_collaborative_; }
  BranchTransformer& transformer() { return transformer_; }

 private:
  BranchOptions options_;
  BranchTransformer transformer_{nullptr};
  torch::Tensor gate_semantic_;
  torch::Tensor gate_collaborative_;
  torch::nn::Linear self_gate_{nullptr};
  std::optional<int> forced_;
};
TORCH_MODULE(DualBranch);

}  // namespace discrec::dual_branch
