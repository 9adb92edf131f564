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

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "discrec/nn/layers.hpp"

namespace discrec::recommender {

struct BackboneConfig {
  int layers = 4;
  int model_dim = 128;
  int heads = 6;
  int head_dim = 64;
  int ffn_dim = 1024;
  double dropout = 0.1;
  int relative_buckets = 32;
  int relative_max_distance = 128;
};

class EncoderLayerImpl : public torch::nn::Module {
 public:
  explicit EncoderLayerImpl(const BackboneConfig& c);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask, const torch::Tensor& bias,
                        torch::Tensor* probs = nullptr);

 private:
  nn::RmsNorm norm1_{nullptr}, norm2_{nullptr};
  nn::MultiHeadAttention self_attn_{nullptr};
  nn::FeedForward ffn_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
};
TORCH_MODULE(EncoderLayer);

class DecoderLayerImpl : public torch::nn::Module {
 public:
  explicit DecoderLayerImpl(const BackboneConfig& c);
  torch::Tensor forward(const torch::Tensor& y, const torch::Tensor& self_mask,
                        const torch::Tensor& bias, const torch::Tensor& memory,
                        const torch::Tensor& memory_mask);

 private:
  nn::RmsNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  nn::MultiHeadAttention self_attn_{nullptr}, cross_attn_{nullptr};
  nn::FeedForward ffn_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
};
TORCH_MODULE(DecoderLayer);

// Per-layer input transform, applied before layer `index` (used by the
// variant that re-applies the dual-branch module at every layer).
using LayerHook = std::function<torch::Tensor(int index, const torch::Tensor& input)>;

// T5-style encoder-decoder: pre-RMSNorm blocks, bucketed relative position
// bias shared across the layers of each stack, final RMSNorm per stack.
class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(const BackboneConfig& c);

  // `pad` is [B, N] bool. When `attention` is given it receives the
  // per-layer self-attention probabilities [B, H, N, N].
  torch::Tensor encode(const torch::Tensor& embedded, const torch::Tensor& pad,
                       const LayerHook& hook = {}, std::vector<torch::Tensor>* attention = nullptr);
  torch::Tensor decode(const torch::Tensor& embedded, const torch::Tensor& memory,
                       const torch::Tensor& memory_pad, const LayerHook& hook = {});

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  torch::nn::ModuleList encoder_layers_{nullptr};
  torch::nn::ModuleList decoder_layers_{nullptr};
  nn::RelativePositionBias encoder_bias_{nullptr};
  nn::RelativePositionBias decoder_bias_{nullptr};
  nn::RmsNorm encoder_norm_{nullptr}, decoder_norm_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
};
TORCH_MODULE(Backbone);

// [B, 1, 1, N] additive mask hiding PAD keys.
torch::Tensor key_padding_mask(const torch::Tensor& pad, torch::Dtype dtype);
// [1, 1, N, N] additive lower-triangular mask.
torch::Tensor causal_mask(std::int64_t n, torch::Dtype dtype);

}  // namespace discrec::recommender
