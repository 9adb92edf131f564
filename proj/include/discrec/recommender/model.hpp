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
#include <string>
#include <vector>

#include <torch/torch.h>

#include "discrec/dual_branch/dual_branch.hpp"
#include "discrec/recommender/backbone.hpp"
#include "discrec/recommender/batch.hpp"

namespace discrec::recommender {

enum class Variant {
  kDiscRec,
  kWoIPE,
  kWoTF,
  kWoGating,
  kBaseline,
  kWithPE,
  kWithIE,
  kAllLayer,
  kOneQuery,
  kTokenAvg,
  kSelfGating,
};

std::string variant_name(Variant v);
// Throws ConfigError listing the valid names.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();
const std::vector<Variant>& ablation_variants();
bool uses_dual_branch(Variant v);

struct RecommenderConfig {
  BackboneConfig backbone;
  dual_branch::BranchOptions branch;  // model_dim is taken from the backbone
  int levels = 4;
  int codebook_size = 256;
  int max_len = 20;   // history items kept per sample
  int n_items = 0;    // item-ID table size for WithIE
  Variant variant = Variant::kDiscRec;
  bool share_branch = false;  // decoder side reuses the encoder-side module
  std::uint64_t seed = 0;
  torch::Dtype dtype = torch::kFloat32;

  void validate() const;
};

std::string config_to_json(const RecommenderConfig& c);
RecommenderConfig config_from_json(const std::string& text);

struct EncoderState {
  torch::Tensor hidden;  // [B, N, D]
  torch::Tensor pad;     // [B, N] bool

  EncoderState repeat(std::int64_t times) const;  // batch-1 state -> [times, ...]
};

// Intermediate tensors captured for diagnostics.
struct Trace {
  std::vector<torch::Tensor> encoder_attention;  // per layer [B, H, N, N]
  dual_branch::BranchOutputs encoder_branch;     // embedding-layer M on the encoder side
  dual_branch::Layout encoder_layout;
};

class RecommenderImpl : public torch::nn::Module {
 public:
  explicit RecommenderImpl(RecommenderConfig config);

  // Rows of the token table for [X..., EOS] (item slots resolved through the
  // item-ID table for WithIE).
  torch::Tensor embed_input(const torch::Tensor& tokens, const torch::Tensor& item_rows = {});
  torch::Tensor embed_target(const torch::Tensor& tokens);

  EncoderState encode(const Batch& batch, Trace* trace = nullptr);
  torch::Tensor decode(const EncoderState& state, const torch::Tensor& decoder_tokens);
  // Inner products with the token table; PAD/BOS/EOS logits are -inf.
  torch::Tensor token_logits(const torch::Tensor& decoder_hidden);
  // Mean over the batch of -sum_l log p(Y_l | X, Y_<l).
  torch::Tensor loss(const Batch& batch);
  torch::Tensor per_sample_loss(const Batch& batch);

  // Log-probabilities of the next token after each decoder prefix
  // ([P, t+1] starting with BOS) given a batch-P encoder state.
  torch::Tensor next_token_log_probs(const EncoderState& state, const torch::Tensor& prefixes);

  // The dual-branch module M for one side (embedding layer).
  dual_branch::BranchOutputs apply_branch(dual_branch::Side side, const torch::Tensor& embedded,
                                          const torch::Tensor& tokens, int layer = 0);

  const RecommenderConfig& config() const { return config_; }
  torch::nn::Embedding& token_table() { return tokens_; }
  torch::Tensor& ipe_table() { return ipe_; }
  Backbone& backbone() { return backbone_; }
  dual_branch::DualBranch branch(dual_branch::Side side, int layer = 0);
  std::int64_t vocab_size() const;

 private:
  torch::Tensor add_positions(const torch::Tensor& embedded, const torch::Tensor& tokens);

  RecommenderConfig config_;
  torch::nn::Embedding tokens_{nullptr};
  torch::Tensor ipe_;
  torch::nn::ModuleList encoder_branches_{nullptr};
  torch::nn::ModuleList decoder_branches_{nullptr};
  torch::nn::Embedding positions_{nullptr};
  torch::nn::Embedding items_{nullptr};
  Backbone backbone_{nullptr};
};
TORCH_MODULE(Recommender);

Recommender build_variant(const RecommenderConfig& config);

}  // namespace discrec::recommender
